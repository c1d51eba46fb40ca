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

#include "cd/toy_transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cd/error.hpp"
#include "cd/numerics.hpp"
#include "cd/rng.hpp"

namespace cd {
namespace {

constexpr double kInitStd = 0.02;

double activate(double x, Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kGelu:
      return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
  }
  fail(ErrorKind::kInvalidInput, "unknown activation");
}

double activate_grad(double x, Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kGelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    }
  }
  fail(ErrorKind::kInvalidInput, "unknown activation");
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = kInitStd * rng.gaussian();
  return m;
}

void validate(const ModelConfig& c) {
  if (c.dim < 1 || c.heads < 1 || c.ffn_dim < 1 || c.n_classes < 1 || c.vocab_size < 1)
    fail(ErrorKind::kInvalidInput, "model dimensions must be positive");
  if (c.dim % c.heads != 0)
    fail(ErrorKind::kInvalidInput, "head count must divide embedding dim");
}

Matrix concat_columns(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.rows() != b.rows()) fail(ErrorKind::kShapeError, "row mismatch in concat");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

}  // namespace

ToyTransformer::ToyTransformer(const ModelConfig& config) : config_(config) {
  validate(config_);
  Rng rng(config_.seed);
  const auto d = static_cast<std::size_t>(config_.dim);
  const auto dh = static_cast<std::size_t>(config_.head_dim());
  for (int h = 0; h < config_.heads; ++h) weights_.wq.push_back(gaussian_matrix(dh, d, rng));
  for (int h = 0; h < config_.heads; ++h) weights_.wk.push_back(gaussian_matrix(dh, d, rng));
  for (int h = 0; h < config_.heads; ++h) weights_.wv.push_back(gaussian_matrix(dh, d, rng));
  for (int h = 0; h < config_.heads; ++h) weights_.wo.push_back(gaussian_matrix(d, dh, rng));
  weights_.w1 = gaussian_matrix(d, static_cast<std::size_t>(config_.ffn_dim), rng);
  weights_.w2 = gaussian_matrix(d, static_cast<std::size_t>(config_.ffn_dim), rng);
  weights_.w_cls = gaussian_matrix(static_cast<std::size_t>(config_.n_classes), d, rng);
  weights_.embed = gaussian_matrix(d, static_cast<std::size_t>(config_.vocab_size), rng);
}

Matrix ToyTransformer::embed_tokens(const std::vector<int>& ids) const {
  Matrix out(static_cast<std::size_t>(config_.dim), ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= config_.vocab_size)
      fail(ErrorKind::kInvalidInput, "token id out of range: " + std::to_string(ids[j]));
    for (std::size_t i = 0; i < out.rows(); ++i)
      out(i, j) = weights_.embed(i, static_cast<std::size_t>(ids[j]));
  }
  return out;
}

AttentionTrace ToyTransformer::forward(const Matrix& prompt, const Matrix& input) const {
  if (prompt.empty() && input.empty())
    fail(ErrorKind::kShapeError, "forward needs at least one token");
  if (!prompt.empty() && prompt.rows() != static_cast<std::size_t>(config_.dim))
    fail(ErrorKind::kShapeError, "prompt rows != model dim");
  if (!input.empty() && input.rows() != static_cast<std::size_t>(config_.dim))
    fail(ErrorKind::kShapeError, "input rows != model dim");

  AttentionTrace trace;
  trace.n_prompt = static_cast<int>(prompt.cols());
  trace.t = concat_columns(prompt, input);
  const std::size_t n = trace.t.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.head_dim()));

  trace.x = trace.t;
  for (int h = 0; h < config_.heads; ++h) {
    const Matrix q = weights_.wq[static_cast<std::size_t>(h)] * trace.t;  // dh x n
    const Matrix k = weights_.wk[static_cast<std::size_t>(h)] * trace.t;
    const Matrix v = weights_.wv[static_cast<std::size_t>(h)] * trace.t;

    Matrix attn(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> scores(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < q.rows(); ++a) s += q(a, i) * k(a, j);
        scores[j] = s * scale;
      }
      const std::vector<double> row = softmax(scores);
      for (std::size_t j = 0; j < n; ++j) attn(i, j) = row[j];
    }

    Matrix z(v.rows(), n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < v.rows(); ++a) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += attn(i, j) * v(a, j);
        z(a, i) = s;
      }

    const Matrix o = weights_.wo[static_cast<std::size_t>(h)] * z;  // d x n
    trace.x += o;
    trace.attn.push_back(std::move(attn));
    trace.z.push_back(std::move(z));
  }

  trace.h_pre = weights_.w1.transposed() * trace.x;  // M x n
  trace.h_act = trace.h_pre;
  for (std::size_t i = 0; i < trace.h_act.rows(); ++i)
    for (std::size_t j = 0; j < trace.h_act.cols(); ++j)
      trace.h_act(i, j) = activate(trace.h_pre(i, j), config_.activation);
  trace.ffn = weights_.w2 * trace.h_act;  // d x n
  trace.y = trace.x + trace.ffn;

  trace.readout_pos = config_.readout == Readout::kFirstPrompt && trace.n_prompt > 0
                          ? 0
                          : static_cast<int>(n) - 1;
  trace.logits = weights_.w_cls.matvec(trace.y.col(static_cast<std::size_t>(trace.readout_pos)));
  for (double v : trace.logits)
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidInput, "non-finite logits");
  return trace;
}

Gradients ToyTransformer::backward(const AttentionTrace& trace,
                                   const std::vector<double>& logit_grad) const {
  if (logit_grad.size() != static_cast<std::size_t>(config_.n_classes))
    fail(ErrorKind::kShapeError, "logit gradient size != n_classes");
  const std::size_t n = trace.t.cols();
  const std::size_t d = trace.t.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.head_dim()));

  // logits = w_cls . y[:, readout]
  Matrix g_y(d, n);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < logit_grad.size(); ++c)
      s += weights_.w_cls(c, i) * logit_grad[c];
    g_y(i, static_cast<std::size_t>(trace.readout_pos)) = s;
  }

  // y = x + w2 . phi(w1^T x)
  Matrix g_hact = weights_.w2.transposed() * g_y;  // M x n
  Matrix g_hpre = g_hact;
  for (std::size_t i = 0; i < g_hpre.rows(); ++i)
    for (std::size_t j = 0; j < g_hpre.cols(); ++j)
      g_hpre(i, j) *= activate_grad(trace.h_pre(i, j), config_.activation);
  Matrix g_x = g_y + weights_.w1 * g_hpre;

  // x = t + sum_h wo_h . z_h
  Matrix g_t = g_x;
  for (int h = 0; h < config_.heads; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    const Matrix& attn = trace.attn[hs];
    const Matrix q = weights_.wq[hs] * trace.t;
    const Matrix k = weights_.wk[hs] * trace.t;
    const Matrix v = weights_.wv[hs] * trace.t;

    const Matrix g_z = weights_.wo[hs].transposed() * g_x;  // dh x n

    // z[:,i] = sum_j attn(i,j) v[:,j]
    Matrix g_v(v.rows(), n);
    for (std::size_t a = 0; a < v.rows(); ++a)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += g_z(a, i) * attn(i, j);
        g_v(a, j) = s;
      }

    Matrix g_attn(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < v.rows(); ++a) s += g_z(a, i) * v(a, j);
        g_attn(i, j) = s;
      }

    // Row-wise softmax jacobian.
    Matrix g_scores(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < n; ++j) inner += g_attn(i, j) * attn(i, j);
      for (std::size_t j = 0; j < n; ++j)
        g_scores(i, j) = attn(i, j) * (g_attn(i, j) - inner);
    }

    // scores(i,j) = scale * q[:,i] . k[:,j]
    Matrix g_q(q.rows(), n);
    Matrix g_k(k.rows(), n);
    for (std::size_t a = 0; a < q.rows(); ++a)
      for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        double sk = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          sq += g_scores(i, j) * k(a, j);
          sk += g_scores(j, i) * q(a, j);
        }
        g_q(a, i) = sq * scale;
        g_k(a, i) = sk * scale;
      }

    g_t += weights_.wq[hs].transposed() * g_q;
    g_t += weights_.wk[hs].transposed() * g_k;
    g_t += weights_.wv[hs].transposed() * g_v;
  }

  Gradients grads;
  const auto np = static_cast<std::size_t>(trace.n_prompt);
  grads.d_prompt = Matrix(d, np);
  grads.d_input = Matrix(d, n - np);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < np; ++j) grads.d_prompt(i, j) = g_t(i, j);
    for (std::size_t j = np; j < n; ++j) grads.d_input(i, j - np) = g_t(i, j);
  }
  return grads;
}

LossResult cross_entropy(const std::vector<double>& logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    fail(ErrorKind::kInvalidInput, "label out of range");
  LossResult r;
  r.probs = softmax(logits);
  const double p = std::max(r.probs[static_cast<std::size_t>(label)], 1e-300);
  r.loss = -std::log(p);
  return r;
}

std::vector<double> cross_entropy_logit_grad(const std::vector<double>& probs, int label) {
  std::vector<double> g = probs;
  g[static_cast<std::size_t>(label)] -= 1.0;
  return g;
}

double verify_span_membership(const ToyTransformer& model, const AttentionTrace& trace) {
  const BlockWeights& w = model.weights();
  const std::size_t d = trace.t.rows();
  const std::size_t m_dim = w.w1.cols();
  double worst = 0.0;
  for (std::size_t i = 0; i < trace.t.cols(); ++i) {
    std::vector<double> recon(d, 0.0);
    for (std::size_t m = 0; m < m_dim; ++m) {
      double inner = 0.0;
      for (std::size_t a = 0; a < d; ++a) inner += w.w1(a, m) * trace.x(a, i);
      const double act = [&] {
        switch (model.config().activation) {
          case Activation::kIdentity:
            return inner;
          case Activation::kRelu:
            return inner > 0.0 ? inner : 0.0;
          case Activation::kGelu:
            return 0.5 * inner * (1.0 + std::erf(inner / std::numbers::sqrt2));
        }
        fail(ErrorKind::kInvalidInput, "unknown activation");
      }();
      for (std::size_t a = 0; a < d; ++a) recon[a] += act * w.w2(a, m);
    }
    double gap = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double diff = recon[a] - trace.ffn(a, i);
      gap += diff * diff;
    }
    worst = std::max(worst, std::sqrt(gap));
  }
  return worst;
}

double verify_two_term_split(const ToyTransformer& model, const AttentionTrace& trace) {
  if (model.config().activation != Activation::kIdentity)
    fail(ErrorKind::kInvalidInput, "two-term split requires the identity activation");
  const BlockWeights& w = model.weights();
  const std::size_t d = trace.t.rows();
  const std::size_t n = trace.t.cols();
  const std::size_t m_dim = w.w1.cols();
  const auto heads = static_cast<std::size_t>(model.config().heads);

  // Precompute r_m^T wo_h wv_h for every head: ffn_dim x dim each.
  std::vector<Matrix> mixed;
  mixed.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h)
    mixed.push_back(w.w1.transposed() * (w.wo[h] * w.wv[h]));

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> split(d, 0.0);
    // Attention term: sum over heads, positions, and inner dims.
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t j = 0; j < n; ++j) {
        const double aij = trace.attn[h](i, j);
        for (std::size_t m = 0; m < m_dim; ++m) {
          double inner = 0.0;
          for (std::size_t a = 0; a < d; ++a) inner += mixed[h](m, a) * trace.t(a, j);
          const double coef = aij * inner;
          for (std::size_t a = 0; a < d; ++a) split[a] += coef * w.w2(a, m);
        }
      }
    // Residual term: the token's own reading of each inner dimension.
    for (std::size_t m = 0; m < m_dim; ++m) {
      double inner = 0.0;
      for (std::size_t a = 0; a < d; ++a) inner += w.w1(a, m) * trace.t(a, i);
      for (std::size_t a = 0; a < d; ++a) split[a] += inner * w.w2(a, m);
    }
    double gap = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double diff = split[a] - trace.ffn(a, i);
      gap += diff * diff;
    }
    worst = std::max(worst, std::sqrt(gap));
  }
  return worst;
}

double gradient_check(const ToyTransformer& model, const Matrix& prompt, const Matrix& input,
                      int label, double step) {
  const AttentionTrace trace = model.forward(prompt, input);
  const LossResult loss = cross_entropy(trace.logits, label);
  const Gradients grads =
      model.backward(trace, cross_entropy_logit_grad(loss.probs, label));

  auto loss_at = [&](const Matrix& p, const Matrix& in) {
    const AttentionTrace t = model.forward(p, in);
    return cross_entropy(t.logits, label).loss;
  };

  double worst = 0.0;
  auto check_entry = [&](Matrix& m, std::size_t i, std::size_t j, double analytic,
                         bool is_prompt) {
    const double saved = m(i, j);
    m(i, j) = saved + step;
    const double up = is_prompt ? loss_at(m, input) : loss_at(prompt, m);
    m(i, j) = saved - step;
    const double down = is_prompt ? loss_at(m, input) : loss_at(prompt, m);
    m(i, j) = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double rel =
        std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, rel);
  };

  Matrix p = prompt;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j)
      check_entry(p, i, j, grads.d_prompt(i, j), true);
  Matrix in = input;
  for (std::size_t i = 0; i < in.rows(); ++i)
    for (std::size_t j = 0; j < in.cols(); ++j)
      check_entry(in, i, j, grads.d_input(i, j), false);
  return worst;
}

}  // namespace cd
