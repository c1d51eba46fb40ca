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

#ifndef CD_ATTRIBUTION_HPP_
#define CD_ATTRIBUTION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cd/decomposer.hpp"
#include "cd/encoder.hpp"
#include "cd/toy_transformer.hpp"

namespace cd {

enum class AttributionMethod {
  kGrad,
  kIntegratedGradients,
  kShapley,
};

// Per-concept attribution of the predicted-class logit. Scores align with
// the decomposition's concept columns.
struct AttributionScores {
  AttributionMethod method = AttributionMethod::kGrad;
  std::vector<double> scores;
  int ig_steps = 0;
  int mc_samples = 0;
  std::vector<double> mc_stderr;  // per concept, Monte Carlo mode only
};

double accuracy(const ToyTransformer& model, const Matrix& prompt,
                const std::vector<EmbeddedExample>& dataset);
double accuracy(const ToyTransformer& model, const Decomposition& dec,
                const std::vector<EmbeddedExample>& dataset);

// Gradient of the predicted-class logit w.r.t. each coefficient row, dotted
// with the row itself (grad x input).
AttributionScores grad_attribution(const ToyTransformer& model, const Decomposition& dec,
                                   const EmbeddedExample& input);

// Midpoint-rule path integral from the zero coefficient matrix to the
// actual one. The sum of scores approaches f(actual) - f(baseline).
AttributionScores integrated_gradients(const ToyTransformer& model, const Decomposition& dec,
                                       const EmbeddedExample& input, int steps);

enum class ShapleyMode {
  kExact,       // full coalition enumeration, needs at most 12 concepts
  kMonteCarlo,  // permutation sampling with antithetic pairs
};

// Shapley values of the coalition game where a concept is switched off by
// zeroing its coefficient row.
AttributionScores shapley_attribution(const ToyTransformer& model, const Decomposition& dec,
                                      const EmbeddedExample& input, ShapleyMode mode,
                                      int samples = 0, std::uint64_t seed = 0);

// Pearson correlation between concept keys and attribution scores over the
// top_k concepts by key. Degenerate slices yield no value.
std::optional<double> concept_correlation(const Decomposition& dec,
                                          const AttributionScores& scores, int top_k);

// Ranks vocabulary tokens by their best cosine against any label embedding
// and returns the top n. Ties keep the input vocabulary order.
std::vector<std::string> vocab_baseline(const Encoder& encoder,
                                        const std::vector<std::string>& labels,
                                        const std::vector<std::string>& vocab, int n);

}  // namespace cd

#endif  // CD_ATTRIBUTION_HPP_
