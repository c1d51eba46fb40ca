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

#include "cd/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "cd/error.hpp"
#include "cd/numerics.hpp"
#include "cd/rng.hpp"

namespace cd {
namespace {

int predicted_class(const ToyTransformer& model, const Matrix& prompt, const Matrix& input) {
  const AttentionTrace trace = model.forward(prompt, input);
  return static_cast<int>(std::distance(
      trace.logits.begin(), std::max_element(trace.logits.begin(), trace.logits.end())));
}

// Gradient of one logit w.r.t. the coefficient matrix, at coefficients qm.
Matrix coefficient_gradient(const ToyTransformer& model, const Matrix& c, const Matrix& qm,
                            const Matrix& input, int target) {
  const AttentionTrace trace = model.forward(c * qm, input);
  std::vector<double> logit_grad(trace.logits.size(), 0.0);
  logit_grad[static_cast<std::size_t>(target)] = 1.0;
  const Gradients g = model.backward(trace, logit_grad);
  return c.transposed() * g.d_prompt;
}

double target_logit(const ToyTransformer& model, const Matrix& c, const Matrix& qm,
                    const Matrix& input, int target) {
  const AttentionTrace trace = model.forward(c * qm, input);
  return trace.logits[static_cast<std::size_t>(target)];
}

Matrix masked_rows(const Matrix& q, std::uint32_t mask) {
  Matrix out(q.rows(), q.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    if ((mask >> i & 1u) == 0) continue;
    for (std::size_t j = 0; j < q.cols(); ++j) out(i, j) = q(i, j);
  }
  return out;
}

}  // namespace

double accuracy(const ToyTransformer& model, const Matrix& prompt,
                const std::vector<EmbeddedExample>& dataset) {
  return prompt_accuracy(model, prompt, dataset);
}

double accuracy(const ToyTransformer& model, const Decomposition& dec,
                const std::vector<EmbeddedExample>& dataset) {
  return prompt_accuracy(model, dec.prompt(), dataset);
}

AttributionScores grad_attribution(const ToyTransformer& model, const Decomposition& dec,
                                   const EmbeddedExample& input) {
  const int target = predicted_class(model, dec.prompt(), input.input);
  const Matrix grad = coefficient_gradient(model, dec.c, dec.q, input.input, target);

  AttributionScores out;
  out.method = AttributionMethod::kGrad;
  out.scores.assign(dec.q.rows(), 0.0);
  for (std::size_t p = 0; p < dec.q.rows(); ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < dec.q.cols(); ++j) s += grad(p, j) * dec.q(p, j);
    out.scores[p] = s;
  }
  return out;
}

AttributionScores integrated_gradients(const ToyTransformer& model, const Decomposition& dec,
                                       const EmbeddedExample& input, int steps) {
  if (steps < 1) fail(ErrorKind::kInvalidInput, "ig steps must be >= 1");
  const int target = predicted_class(model, dec.prompt(), input.input);

  Matrix avg_grad(dec.q.rows(), dec.q.cols());
  for (int s = 0; s < steps; ++s) {
    const double alpha = (static_cast<double>(s) + 0.5) / static_cast<double>(steps);
    avg_grad +=
        coefficient_gradient(model, dec.c, dec.q.scaled(alpha), input.input, target);
  }
  avg_grad.scale_in_place(1.0 / static_cast<double>(steps));

  AttributionScores out;
  out.method = AttributionMethod::kIntegratedGradients;
  out.ig_steps = steps;
  out.scores.assign(dec.q.rows(), 0.0);
  for (std::size_t p = 0; p < dec.q.rows(); ++p) {
    double sum = 0.0;
    for (std::size_t j = 0; j < dec.q.cols(); ++j) sum += dec.q(p, j) * avg_grad(p, j);
    out.scores[p] = sum;
  }
  return out;
}

AttributionScores shapley_attribution(const ToyTransformer& model, const Decomposition& dec,
                                      const EmbeddedExample& input, ShapleyMode mode,
                                      int samples, std::uint64_t seed) {
  const auto n = dec.q.rows();
  if (n == 0) fail(ErrorKind::kInvalidInput, "empty decomposition");
  if (n > 32) fail(ErrorKind::kBudgetError, "coalition masks support at most 32 concepts");
  const int target = predicted_class(model, dec.prompt(), input.input);
  auto value_of = [&](std::uint32_t mask) {
    return target_logit(model, dec.c, masked_rows(dec.q, mask), input.input, target);
  };

  AttributionScores out;
  out.method = AttributionMethod::kShapley;
  out.scores.assign(n, 0.0);

  if (mode == ShapleyMode::kExact) {
    if (n > 12)
      fail(ErrorKind::kBudgetError,
           "exact mode enumerates 2^n coalitions; got n = " + std::to_string(n));
    const auto full = static_cast<std::uint32_t>((1ull << n) - 1);
    std::vector<double> value(full + 1);
    for (std::uint32_t mask = 0; mask <= full; ++mask) value[mask] = value_of(mask);

    std::vector<double> fact(n + 1, 1.0);
    for (std::size_t i = 1; i <= n; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

    for (std::size_t p = 0; p < n; ++p) {
      const auto bit = static_cast<std::uint32_t>(1u << p);
      double total = 0.0;
      for (std::uint32_t mask = 0; mask <= full; ++mask) {
        if (mask & bit) continue;
        const auto s = static_cast<std::size_t>(std::popcount(mask));
        const double weight = fact[s] * fact[n - 1 - s] / fact[n];
        total += weight * (value[mask | bit] - value[mask]);
      }
      out.scores[p] = total;
    }
    return out;
  }

  if (samples < 1) fail(ErrorKind::kInvalidInput, "monte carlo mode needs samples >= 1");
  out.mc_samples = samples;
  Rng rng(seed);
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);

  std::vector<double> sum(n, 0.0);
  std::vector<double> sum_sq(n, 0.0);
  int used = 0;
  const double v_empty = value_of(0);
  while (used < samples) {
    rng.shuffle(perm);
    for (int half = 0; half < 2 && used < samples; ++half) {
      std::uint32_t mask = 0;
      double prev = v_empty;
      for (std::size_t pos = 0; pos < n; ++pos) {
        // Antithetic pair: the second pass walks the permutation backwards.
        const int elem = half == 0 ? perm[pos] : perm[n - 1 - pos];
        mask |= 1u << elem;
        const double cur = value_of(mask);
        const double marginal = cur - prev;
        sum[static_cast<std::size_t>(elem)] += marginal;
        sum_sq[static_cast<std::size_t>(elem)] += marginal * marginal;
        prev = cur;
      }
      ++used;
    }
  }

  out.mc_stderr.assign(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const double mean = sum[p] / static_cast<double>(used);
    out.scores[p] = mean;
    if (used > 1) {
      const double var =
          (sum_sq[p] - static_cast<double>(used) * mean * mean) / static_cast<double>(used - 1);
      out.mc_stderr[p] = std::sqrt(std::max(0.0, var) / static_cast<double>(used));
    }
  }
  return out;
}

std::optional<double> concept_correlation(const Decomposition& dec,
                                          const AttributionScores& scores, int top_k) {
  const std::vector<double> keys = concept_keys(dec);
  if (scores.scores.size() != keys.size())
    fail(ErrorKind::kInvalidInput, "score count != concept count");
  if (top_k < 2 || static_cast<std::size_t>(top_k) > keys.size())
    fail(ErrorKind::kInvalidInput, "top_k out of range");

  std::vector<std::size_t> idx(keys.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    return dec.concept_ids[a] < dec.concept_ids[b];
  });
  idx.resize(static_cast<std::size_t>(top_k));

  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i : idx) {
    x.push_back(keys[i]);
    y.push_back(scores.scores[i]);
  }
  const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (x_const || y_const) return std::nullopt;
  return pearson(x, y);
}

std::vector<std::string> vocab_baseline(const Encoder& encoder,
                                        const std::vector<std::string>& labels,
                                        const std::vector<std::string>& vocab, int n) {
  if (vocab.empty()) fail(ErrorKind::kInvalidInput, "empty vocabulary");
  if (labels.empty()) fail(ErrorKind::kInvalidInput, "empty label set");
  if (n < 1 || static_cast<std::size_t>(n) > vocab.size())
    fail(ErrorKind::kInvalidInput, "n out of range");

  std::vector<std::vector<double>> label_vecs;
  label_vecs.reserve(labels.size());
  for (const std::string& label : labels) label_vecs.push_back(encoder.embed(label));

  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const std::vector<double> v = encoder.embed(vocab[i]);
    double best = -2.0;
    for (const auto& lv : label_vecs) best = std::max(best, cosine(v, lv));
    ranked.emplace_back(best, i);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(vocab[ranked[static_cast<std::size_t>(i)].second]);
  return out;
}

}  // namespace cd
