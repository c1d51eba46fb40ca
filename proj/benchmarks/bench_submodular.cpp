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

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "cd/candidates.hpp"
#include "cd/matrix.hpp"
#include "cd/rng.hpp"
#include "cd/submodular.hpp"

namespace {

struct Fixture {
  cd::CandidatePool pool;
  std::vector<cd::ClassEmbedding> classes;
};

Fixture make_fixture(int n_candidates, int dim) {
  cd::Rng rng(99);
  auto random_unit = [&] {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = rng.gaussian();
    return cd::l2_normalized(v);
  };

  std::vector<cd::ConceptCandidate> cands;
  for (int i = 0; i < n_candidates; ++i) {
    cd::ConceptCandidate c;
    c.class_label = "a";
    c.text = "candidate " + std::to_string(i);
    c.embedding = random_unit();
    cands.push_back(std::move(c));
  }
  Fixture f{cd::CandidatePool(std::move(cands)),
            {{"a", random_unit()}, {"b", random_unit()}}};
  return f;
}

void bm_greedy_naive(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<int>(state.range(0)), 32);
  cd::SelectionConfig cfg;
  cfg.k = 10;
  const cd::SimilarityCache cache = cd::build_similarity_cache(f.pool, "a", f.classes, cfg);
  for (auto _ : state) {
    const cd::SelectedSet s = cd::greedy_select(cache, cfg);
    benchmark::DoNotOptimize(s.ids.data());
  }
}
BENCHMARK(bm_greedy_naive)->Arg(64)->Arg(256)->Arg(1024);

void bm_greedy_lazy(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<int>(state.range(0)), 32);
  cd::SelectionConfig cfg;
  cfg.k = 10;
  const cd::SimilarityCache cache = cd::build_similarity_cache(f.pool, "a", f.classes, cfg);
  for (auto _ : state) {
    const cd::SelectedSet s = cd::lazy_greedy_select(cache, cfg);
    benchmark::DoNotOptimize(s.ids.data());
  }
}
BENCHMARK(bm_greedy_lazy)->Arg(64)->Arg(256)->Arg(1024);

}  // namespace
