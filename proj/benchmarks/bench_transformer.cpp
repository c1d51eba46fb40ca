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

void bm_forward(benchmark::State& state) {
  cd::ModelConfig cfg;
  cfg.dim = 64;
  cfg.seed = 1;
  const cd::ToyTransformer model(cfg);
  const cd::Matrix prompt = random_matrix(cfg.dim, 4, 2);
  const cd::Matrix input = random_matrix(cfg.dim, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    const cd::AttentionTrace trace = model.forward(prompt, input);
    benchmark::DoNotOptimize(trace.logits.data());
  }
}
BENCHMARK(bm_forward)->Arg(8)->Arg(32)->Arg(128);

void bm_forward_backward(benchmark::State& state) {
  cd::ModelConfig cfg;
  cfg.dim = 64;
  cfg.seed = 1;
  const cd::ToyTransformer model(cfg);
  const cd::Matrix prompt = random_matrix(cfg.dim, 4, 2);
  const cd::Matrix input = random_matrix(cfg.dim, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    const cd::AttentionTrace trace = model.forward(prompt, input);
    const cd::LossResult loss = cd::cross_entropy(trace.logits, 0);
    const cd::Gradients g =
        model.backward(trace, cd::cross_entropy_logit_grad(loss.probs, 0));
    benchmark::DoNotOptimize(g.d_prompt.data().data());
  }
}
BENCHMARK(bm_forward_backward)->Arg(8)->Arg(32);

}  // namespace
