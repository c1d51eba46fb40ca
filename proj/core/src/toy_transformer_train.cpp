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
#include <fstream>

#include <json.hpp>

#include "cd/error.hpp"
#include "cd/rng.hpp"
#include "cd/tensor_io.hpp"
#include "cd/toy_transformer.hpp"

namespace cd {
namespace {

constexpr double kInitStd = 0.02;

double mean_loss(const ToyTransformer& model, const Matrix& prompt,
                 const std::vector<EmbeddedExample>& examples,
                 const std::vector<std::size_t>& indices) {
  double total = 0.0;
  for (std::size_t idx : indices) {
    const EmbeddedExample& ex = examples[idx];
    const AttentionTrace trace = model.forward(prompt, ex.input);
    total += cross_entropy(trace.logits, ex.label).loss;
  }
  return total / static_cast<double>(indices.size());
}

}  // namespace

TrainResult p_tune(const ToyTransformer& model, const std::vector<EmbeddedExample>& dataset,
                   int n_prompt, const TrainParams& params) {
  if (dataset.empty()) fail(ErrorKind::kInvalidInput, "empty training set");
  if (n_prompt < 1) fail(ErrorKind::kInvalidInput, "prompt length must be >= 1");
  if (params.lr < 0.0 || params.batch_size < 1 || params.max_steps < 1 ||
      params.patience < 1 || params.eval_every < 1 || params.val_fraction < 0.0 ||
      params.val_fraction >= 1.0)
    fail(ErrorKind::kInvalidInput, "bad training parameters");
  for (const EmbeddedExample& ex : dataset) {
    if (ex.input.rows() != static_cast<std::size_t>(model.config().dim))
      fail(ErrorKind::kShapeError, "example dim != model dim");
    if (ex.label < 0 || ex.label >= model.config().n_classes)
      fail(ErrorKind::kInvalidInput, "example label out of range");
  }

  Rng rng(params.seed);
  const auto d = static_cast<std::size_t>(model.config().dim);
  Matrix prompt(d, static_cast<std::size_t>(n_prompt));
  for (std::size_t i = 0; i < prompt.rows(); ++i)
    for (std::size_t j = 0; j < prompt.cols(); ++j) prompt(i, j) = kInitStd * rng.gaussian();

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const auto val_n = static_cast<std::size_t>(
      std::llround(params.val_fraction * static_cast<double>(dataset.size())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_n));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(val_n), order.end());
  if (train_idx.empty()) fail(ErrorKind::kInvalidInput, "validation split leaves no training data");
  if (val_idx.empty()) val_idx = train_idx;  // degenerate split: validate on train

  Matrix m1(prompt.rows(), prompt.cols());
  Matrix m2(prompt.rows(), prompt.cols());

  TrainResult result;
  result.prompt = prompt;
  result.best_val_loss = mean_loss(model, prompt, dataset, val_idx);
  result.best_step = 0;

  std::vector<std::size_t> epoch = train_idx;
  rng.shuffle(epoch);
  std::size_t cursor = 0;
  int since_best = 0;

  // Once stepping has begun, a non-finite forward means the optimizer blew
  // the prompt up, so it surfaces as divergence rather than bad input.
  auto step_forward = [&](const Matrix& p, const EmbeddedExample& ex) {
    try {
      return model.forward(p, ex.input);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kInvalidInput)
        fail(ErrorKind::kTrainingError, std::string("training diverged: ") + e.what());
      throw;
    }
  };

  for (int step = 1; step <= params.max_steps; ++step) {
    Matrix grad(prompt.rows(), prompt.cols());
    double batch_loss = 0.0;
    const int batch = std::min<int>(params.batch_size, static_cast<int>(train_idx.size()));
    for (int b = 0; b < batch; ++b) {
      if (cursor == epoch.size()) {
        rng.shuffle(epoch);
        cursor = 0;
      }
      const EmbeddedExample& ex = dataset[epoch[cursor++]];
      const AttentionTrace trace = step_forward(prompt, ex);
      const LossResult loss = cross_entropy(trace.logits, ex.label);
      batch_loss += loss.loss;
      const Gradients g = model.backward(trace, cross_entropy_logit_grad(loss.probs, ex.label));
      grad += g.d_prompt;
    }
    batch_loss /= static_cast<double>(batch);
    grad.scale_in_place(1.0 / static_cast<double>(batch));
    if (!std::isfinite(batch_loss)) fail(ErrorKind::kTrainingError, "training loss diverged");
    result.train_curve.push_back(batch_loss);

    const double bc1 = 1.0 - std::pow(params.beta1, step);
    const double bc2 = 1.0 - std::pow(params.beta2, step);
    for (std::size_t i = 0; i < prompt.rows(); ++i)
      for (std::size_t j = 0; j < prompt.cols(); ++j) {
        const double g = grad(i, j);
        m1(i, j) = params.beta1 * m1(i, j) + (1.0 - params.beta1) * g;
        m2(i, j) = params.beta2 * m2(i, j) + (1.0 - params.beta2) * g * g;
        const double update = (m1(i, j) / bc1) / (std::sqrt(m2(i, j) / bc2) + params.eps);
        prompt(i, j) -= params.lr * (update + params.weight_decay * prompt(i, j));
      }
    if (!prompt.all_finite()) fail(ErrorKind::kTrainingError, "prompt diverged");

    result.steps_run = step;
    if (step % params.eval_every == 0) {
      double val_loss = 0.0;
      try {
        val_loss = mean_loss(model, prompt, dataset, val_idx);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kInvalidInput)
          fail(ErrorKind::kTrainingError, std::string("training diverged: ") + e.what());
        throw;
      }
      if (!std::isfinite(val_loss)) fail(ErrorKind::kTrainingError, "validation loss diverged");
      result.val_curve.push_back(val_loss);
      if (val_loss < result.best_val_loss) {
        result.best_val_loss = val_loss;
        result.best_step = step;
        result.prompt = prompt;
        since_best = 0;
      } else {
        since_best += params.eval_every;
        if (since_best >= params.patience) break;
      }
    }
  }
  return result;
}

double prompt_accuracy(const ToyTransformer& model, const Matrix& prompt,
                       const std::vector<EmbeddedExample>& dataset) {
  if (dataset.empty()) fail(ErrorKind::kInvalidInput, "empty evaluation set");
  std::size_t hits = 0;
  for (const EmbeddedExample& ex : dataset) {
    const AttentionTrace trace = model.forward(prompt, ex.input);
    const auto arg = static_cast<int>(std::distance(
        trace.logits.begin(), std::max_element(trace.logits.begin(), trace.logits.end())));
    if (arg == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

void save_checkpoint(const ToyTransformer& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const ModelConfig& c = model.config();
  const BlockWeights& w = model.weights();

  nlohmann::json manifest;
  manifest["config"]["dim"] = c.dim;
  manifest["config"]["heads"] = c.heads;
  manifest["config"]["ffn_dim"] = c.ffn_dim;
  manifest["config"]["n_classes"] = c.n_classes;
  manifest["config"]["vocab_size"] = c.vocab_size;
  manifest["config"]["activation"] = static_cast<int>(c.activation);
  manifest["config"]["readout"] = static_cast<int>(c.readout);
  manifest["config"]["seed"] = c.seed;

  std::vector<std::pair<std::string, const Matrix*>> tensors;
  for (int h = 0; h < c.heads; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    tensors.emplace_back("wq" + std::to_string(h), &w.wq[hs]);
    tensors.emplace_back("wk" + std::to_string(h), &w.wk[hs]);
    tensors.emplace_back("wv" + std::to_string(h), &w.wv[hs]);
    tensors.emplace_back("wo" + std::to_string(h), &w.wo[hs]);
  }
  tensors.emplace_back("w1", &w.w1);
  tensors.emplace_back("w2", &w.w2);
  tensors.emplace_back("w_cls", &w.w_cls);
  tensors.emplace_back("embed", &w.embed);

  for (const auto& [name, matrix] : tensors) {
    const std::string file = name + ".cdem";
    save_matrix(dir / file, *matrix);
    manifest["tensors"][name]["file"] = file;
    manifest["tensors"][name]["rows"] = matrix->rows();
    manifest["tensors"][name]["cols"] = matrix->cols();
  }

  std::ofstream out(dir / "manifest.json");
  if (!out) fail(ErrorKind::kFileError, "cannot write checkpoint manifest");
  out << manifest.dump(2) << "\n";
}

ToyTransformer load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) fail(ErrorKind::kFileError, "cannot open checkpoint manifest in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("config") || !manifest.contains("tensors"))
    fail(ErrorKind::kFormatError, "malformed checkpoint manifest");

  ModelConfig c;
  const auto& jc = manifest["config"];
  c.dim = jc["dim"].get<int>();
  c.heads = jc["heads"].get<int>();
  c.ffn_dim = jc["ffn_dim"].get<int>();
  c.n_classes = jc["n_classes"].get<int>();
  c.vocab_size = jc["vocab_size"].get<int>();
  c.activation = static_cast<Activation>(jc["activation"].get<int>());
  c.readout = static_cast<Readout>(jc["readout"].get<int>());
  c.seed = jc["seed"].get<std::uint64_t>();

  ToyTransformer model(c);
  BlockWeights& w = model.mutable_weights();
  auto load = [&](const std::string& name) {
    if (!manifest["tensors"].contains(name))
      fail(ErrorKind::kFormatError, "checkpoint missing tensor " + name);
    return load_matrix(dir / manifest["tensors"][name]["file"].get<std::string>());
  };
  for (int h = 0; h < c.heads; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    w.wq[hs] = load("wq" + std::to_string(h));
    w.wk[hs] = load("wk" + std::to_string(h));
    w.wv[hs] = load("wv" + std::to_string(h));
    w.wo[hs] = load("wo" + std::to_string(h));
  }
  w.w1 = load("w1");
  w.w2 = load("w2");
  w.w_cls = load("w_cls");
  w.embed = load("embed");
  return model;
}

}  // namespace cd
