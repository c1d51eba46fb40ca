// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>

#include "cd/decomposer.hpp"
#include "cd/error.hpp"
#include "cd/numerics.hpp"
#include "cd/rng.hpp"

namespace cd {
namespace {

void validate(const TuneConfig& cfg) {
  if (cfg.mu < 0.0 || cfg.mu > 1.0) fail(ErrorKind::kInvalidInput, "mu must lie in [0,1]");
  if (!(cfg.lr >= 0.0)) fail(ErrorKind::kInvalidInput, "learning rate must be >= 0");
  if (cfg.batch_size < 1 || cfg.max_steps < 1 || cfg.patience < 1 || cfg.eval_every < 1 ||
      cfg.val_fraction < 0.0 || cfg.val_fraction >= 1.0)
    fail(ErrorKind::kInvalidInput, "bad tuning parameters");
}

// Total loss of one example: mu * KL(teacher || student) + task cross
// entropy of the student.
struct ExampleLoss {
  double total = 0.0;
  std::vector<double> student_probs;
};

ExampleLoss example_loss(const ToyTransformer& model, const Matrix& prompt,
                         const EmbeddedExample& ex, const std::vector<double>& teacher_probs,
                         double mu) {
  ExampleLoss out;
  const AttentionTrace trace = model.forward(prompt, ex.input);
  out.student_probs = softmax(trace.logits);
  out.total = mu * kl_divergence(teacher_probs, out.student_probs) +
              cross_entropy(trace.logits, ex.label).loss;
  return out;
}

struct AdamState {
  Matrix m1;
  Matrix m2;

  explicit AdamState(const Matrix& shape_like)
      : m1(shape_like.rows(), shape_like.cols()), m2(shape_like.rows(), shape_like.cols()) {}

  void apply(Matrix& param, const Matrix& grad, const TuneConfig& cfg, int step) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    for (std::size_t i = 0; i < param.rows(); ++i)
      for (std::size_t j = 0; j < param.cols(); ++j) {
        const double g = grad(i, j);
        m1(i, j) = cfg.beta1 * m1(i, j) + (1.0 - cfg.beta1) * g;
        m2(i, j) = cfg.beta2 * m2(i, j) + (1.0 - cfg.beta2) * g * g;
        const double update = (m1(i, j) / bc1) / (std::sqrt(m2(i, j) / bc2) + cfg.eps);
        param(i, j) -= cfg.lr * (update + cfg.weight_decay * param(i, j));
      }
  }
};

}  // namespace

TuneResult cd_tune(const ToyTransformer& model, const Matrix& p_star,
                   const std::vector<SelectedSet>& selected, const CandidatePool& pool,
                   const std::vector<EmbeddedExample>& dataset, const TuneConfig& cfg) {
  validate(cfg);
  if (dataset.empty()) fail(ErrorKind::kInvalidInput, "empty dataset");
  if (selected.empty()) fail(ErrorKind::kInvalidInput, "no selected concept sets");
  if (p_star.rows() != static_cast<std::size_t>(model.config().dim))
    fail(ErrorKind::kShapeError, "tuned prompt rows != model dim");

  const std::vector<int> ids = ordered_selected_ids(selected);
  Matrix c = concept_embedding_matrix(pool, ids);
  if (c.rows() != p_star.rows())
    fail(ErrorKind::kShapeError, "concept embedding dim != model dim");
  Matrix q = solve_q_least_squares(c, p_star);

  // Teacher distributions under the tuned prompt, fixed for the whole run.
  std::vector<std::vector<double>> teacher(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    teacher[i] = softmax(model.forward(p_star, dataset[i].input).logits);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const auto val_n = static_cast<std::size_t>(
      std::llround(cfg.val_fraction * static_cast<double>(dataset.size())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_n));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(val_n), order.end());
  if (train_idx.empty()) fail(ErrorKind::kInvalidInput, "validation split leaves no training data");
  if (val_idx.empty()) val_idx = train_idx;

  auto val_loss_of = [&](const Matrix& cc, const Matrix& qq) {
    const Matrix prompt = cc * qq;
    double total = 0.0;
    for (std::size_t idx : val_idx)
      total += example_loss(model, prompt, dataset[idx], teacher[idx], cfg.mu).total;
    return total / static_cast<double>(val_idx.size());
  };

  TuneResult result;
  result.initial_val_loss = val_loss_of(c, q);
  result.best_val_loss = result.initial_val_loss;
  result.best_step = 0;
  Matrix best_c = c;
  Matrix best_q = q;

  AdamState adam_c(c);
  AdamState adam_q(q);
  std::vector<std::size_t> epoch = train_idx;
  rng.shuffle(epoch);
  std::size_t cursor = 0;
  int since_best = 0;

  // Once stepping has begun, a non-finite forward means the optimizer blew
  // the factors up, so it surfaces as divergence rather than bad input.
  auto step_forward = [&](const Matrix& prompt, const EmbeddedExample& ex) {
    try {
      return model.forward(prompt, ex.input);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kInvalidInput)
        fail(ErrorKind::kTrainingError, std::string("tuning diverged: ") + e.what());
      throw;
    }
  };

  for (int step = 1; step <= cfg.max_steps; ++step) {
    const Matrix prompt = c * q;
    Matrix g_prompt(prompt.rows(), prompt.cols());
    double batch_loss = 0.0;
    const int batch = std::min<int>(cfg.batch_size, static_cast<int>(train_idx.size()));
    for (int b = 0; b < batch; ++b) {
      if (cursor == epoch.size()) {
        rng.shuffle(epoch);
        cursor = 0;
      }
      const std::size_t idx = epoch[cursor++];
      const EmbeddedExample& ex = dataset[idx];
      const AttentionTrace trace = step_forward(prompt, ex);
      const std::vector<double> probs = softmax(trace.logits);
      batch_loss += cfg.mu * kl_divergence(teacher[idx], probs) +
                    cross_entropy(trace.logits, ex.label).loss;

      // d/d logits of mu*KL(t||s) is mu*(s - t); of the cross entropy,
      // s - onehot(label).
      std::vector<double> logit_grad(probs.size());
      for (std::size_t cidx = 0; cidx < probs.size(); ++cidx)
        logit_grad[cidx] = cfg.mu * (probs[cidx] - teacher[idx][cidx]) + probs[cidx];
      logit_grad[static_cast<std::size_t>(ex.label)] -= 1.0;

      const Gradients g = model.backward(trace, logit_grad);
      g_prompt += g.d_prompt;
    }
    batch_loss /= static_cast<double>(batch);
    g_prompt.scale_in_place(1.0 / static_cast<double>(batch));
    if (!std::isfinite(batch_loss)) fail(ErrorKind::kTrainingError, "tuning loss diverged");
    result.train_curve.push_back(batch_loss);

    const Matrix g_q = c.transposed() * g_prompt;
    if (!cfg.freeze_c) {
      const Matrix g_c = g_prompt * q.transposed();
      adam_c.apply(c, g_c, cfg, step);
    }
    adam_q.apply(q, g_q, cfg, step);
    if (!c.all_finite() || !q.all_finite())
      fail(ErrorKind::kTrainingError, "decomposition diverged");

    result.steps_run = step;
    if (step % cfg.eval_every == 0) {
      double val_loss = 0.0;
      try {
        val_loss = val_loss_of(c, q);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kInvalidInput)
          fail(ErrorKind::kTrainingError, std::string("tuning diverged: ") + e.what());
        throw;
      }
      if (!std::isfinite(val_loss)) fail(ErrorKind::kTrainingError, "validation loss diverged");
      result.val_curve.push_back(val_loss);
      if (val_loss < result.best_val_loss) {
        result.best_val_loss = val_loss;
        result.best_step = step;
        best_c = c;
        best_q = q;
        since_best = 0;
      } else {
        since_best += cfg.eval_every;
        if (since_best >= cfg.patience) break;
      }
    }
  }

  Decomposition dec;
  dec.c = std::move(best_c);
  dec.q = std::move(best_q);
  dec.concept_ids = ids;
  for (int id : ids) {
    const ConceptCandidate& cand = pool.by_id(id);
    dec.concept_texts.push_back(cand.text);
    dec.concept_classes.push_back(cand.class_label);
  }
  dec.provenance = Provenance::kCdTuned;
  dec.residual = (dec.c * dec.q - p_star).frobenius_norm();
  dec.within_epsilon = true;

  result.final_fidelity_kl = fidelity_kl(model, p_star, dec.c * dec.q, dataset);
  result.decomposition = std::move(dec);
  return result;
}

}  // namespace cd
