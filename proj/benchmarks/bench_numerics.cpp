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
#include "cd/numerics.hpp"
#include "cd/rng.hpp"

namespace {

cd::Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  cd::Rng rng(seed);
  cd::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

void bm_svd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const cd::Matrix m = random_matrix(n, n / 2, 1);
  for (auto _ : state) {
    const cd::SvdResult r = cd::svd(m);
    benchmark::DoNotOptimize(r.singular_values.data());
  }
}
BENCHMARK(bm_svd)->Arg(16)->Arg(64)->Arg(128);

void bm_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const cd::Matrix a = random_matrix(n, n, 2);
  const cd::Matrix b = random_matrix(n, n, 3);
  for (auto _ : state) {
    const cd::Matrix c = a * b;
    benchmark::DoNotOptimize(c.data().data());
  }
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(128);

void bm_softmax(benchmark::State& state) {
  cd::Rng rng(4);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (double& v : x) v = rng.gaussian();
  for (auto _ : state) {
    const std::vector<double> s = cd::softmax(x);
    benchmark::DoNotOptimize(s.data());
  }
}
BENCHMARK(bm_softmax)->Arg(64)->Arg(1024);

}  // namespace
