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

#include <benchmark/benchmark.h>

#include "cd/attribution.hpp"
#include "cd/decomposer.hpp"
#include "cd/matrix.hpp"
#include "cd/rng.hpp"
#include "cd/toy_transformer.hpp"

namespace {

cd::Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  cd::Rng rng(seed);
  cd::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = 0.1 * rng.gaussian();
  return m;
}

struct Setup {
  cd::ToyTransformer model;
  cd::Decomposition dec;
  cd::EmbeddedExample input;
};

Setup make_setup(int n_concepts) {
  cd::ModelConfig cfg;
  cfg.dim = 32;
  cfg.ffn_dim = 32;
  cfg.seed = 5;
  cd::ToyTransformer model(cfg);
  const cd::Matrix p = random_matrix(cfg.dim, 4, 6);
  cd::Decomposition dec = cd::frobenius_fit(p, n_concepts, 1e-4);
  cd::EmbeddedExample input;
  input.input = random_matrix(cfg.dim, 6, 7);
  input.label = 0;
  return {std::move(model), std::move(dec), std::move(input)};
}

void bm_grad_attribution(benchmark::State& state) {
  const Setup s = make_setup(4);
  for (auto _ : state) {
    const cd::AttributionScores a = cd::grad_attribution(s.model, s.dec, s.input);
    benchmark::DoNotOptimize(a.scores.data());
  }
}
BENCHMARK(bm_grad_attribution);

void bm_integrated_gradients(benchmark::State& state) {
  const Setup s = make_setup(4);
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const cd::AttributionScores a = cd::integrated_gradients(s.model, s.dec, s.input, steps);
    benchmark::DoNotOptimize(a.scores.data());
  }
}
BENCHMARK(bm_integrated_gradients)->Arg(16)->Arg(64);

void bm_shapley_exact(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const cd::AttributionScores a =
        cd::shapley_attribution(s.model, s.dec, s.input, cd::ShapleyMode::kExact);
    benchmark::DoNotOptimize(a.scores.data());
  }
}
BENCHMARK(bm_shapley_exact)->Arg(4)->Arg(8);

void bm_shapley_monte_carlo(benchmark::State& state) {
  const Setup s = make_setup(4);
  const int samples = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const cd::AttributionScores a = cd::shapley_attribution(
        s.model, s.dec, s.input, cd::ShapleyMode::kMonteCarlo, samples, 11);
    benchmark::DoNotOptimize(a.scores.data());
  }
}
BENCHMARK(bm_shapley_monte_carlo)->Arg(100)->Arg(400);

}  // namespace
