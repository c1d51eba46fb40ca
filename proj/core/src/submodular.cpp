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

#include "cd/submodular.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "cd/error.hpp"
#include "cd/numerics.hpp"

namespace cd {
namespace {

void validate(const SelectionConfig& cfg) {
  if (cfg.k < 1) fail(ErrorKind::kInvalidInput, "selection k must be >= 1");
  if (!std::isfinite(cfg.lambda)) fail(ErrorKind::kInvalidInput, "lambda must be finite");
  if (!(cfg.temperature > 0.0))
    fail(ErrorKind::kInvalidInput, "temperature must be positive");
}

double apply_psi(double x, PsiKind psi) {
  switch (psi) {
    case PsiKind::kIdentity:
      return x;
    case PsiKind::kSqrt:
      if (x < 0.0) fail(ErrorKind::kInvalidInput, "sqrt transform needs nonnegative input");
      return std::sqrt(x);
    case PsiKind::kLog1p:
      if (x < -1.0) fail(ErrorKind::kInvalidInput, "log1p transform needs input > -1");
      return std::log1p(x);
  }
  fail(ErrorKind::kInvalidInput, "unknown psi transform");
}

double apply_phi(double cosine, PhiKind phi) {
  return phi == PhiKind::kShiftedCosine ? 0.5 * (1.0 + cosine) : cosine;
}

// Per-candidate diversity value: psi of the entropy of p(y|c), where
// p(y|c) is the temperature softmax of the class similarities of c.
double diversity_of(int local, const SimilarityCache& cache, const SelectionConfig& cfg) {
  const std::vector<double> sims = cache.class_concept.col(static_cast<std::size_t>(local));
  const std::vector<double> p = softmax(sims, cfg.temperature);
  double neg_entropy = 0.0;
  for (double v : p)
    if (v > 0.0) neg_entropy += v * std::log(v);
  return apply_psi(cfg.signed_diversity ? neg_entropy : -neg_entropy, cfg.psi);
}

std::vector<double> all_diversities(const SimilarityCache& cache, const SelectionConfig& cfg) {
  std::vector<double> d(cache.pool_size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = diversity_of(static_cast<int>(i), cache, cfg);
  return d;
}

// Marginal objective gain of adding `x` given the current facility-location
// cover levels (best phi seen per pool element).
double facility_gain(int x, const std::vector<double>& cover_best,
                     const std::vector<double>& diversities, const SimilarityCache& cache,
                     const SelectionConfig& cfg) {
  double gain = cfg.lambda * diversities[static_cast<std::size_t>(x)];
  for (std::size_t c1 = 0; c1 < cache.pool_size(); ++c1) {
    const double phi = cache.concept_concept(c1, static_cast<std::size_t>(x));
    if (phi > cover_best[c1]) gain += phi - cover_best[c1];
  }
  return gain;
}

double pairwise_gain(int x, const std::vector<double>& diversities,
                     const SimilarityCache& cache, const SelectionConfig& cfg) {
  double gain = cfg.lambda * diversities[static_cast<std::size_t>(x)];
  for (std::size_t c1 = 0; c1 < cache.pool_size(); ++c1)
    gain += cache.concept_concept(c1, static_cast<std::size_t>(x));
  return gain;
}

struct GreedyState {
  std::vector<double> diversities;
  std::vector<double> cover_best;  // facility mode only
  std::vector<bool> chosen;

  explicit GreedyState(const SimilarityCache& cache, const SelectionConfig& cfg)
      : diversities(all_diversities(cache, cfg)),
        cover_best(cache.pool_size(), 0.0),
        chosen(cache.pool_size(), false) {}

  double gain_of(int x, const SimilarityCache& cache, const SelectionConfig& cfg) const {
    return cfg.coverage_mode == CoverageMode::kFacilityLocation
               ? facility_gain(x, cover_best, diversities, cache, cfg)
               : pairwise_gain(x, diversities, cache, cfg);
  }

  void accept(int x, const SimilarityCache& cache, const SelectionConfig& cfg) {
    chosen[static_cast<std::size_t>(x)] = true;
    if (cfg.coverage_mode == CoverageMode::kFacilityLocation) {
      for (std::size_t c1 = 0; c1 < cache.pool_size(); ++c1)
        cover_best[c1] =
            std::max(cover_best[c1], cache.concept_concept(c1, static_cast<std::size_t>(x)));
    }
  }
};

SelectedSet finish(const SimilarityCache& cache, const SelectionConfig& cfg,
                   std::vector<int> locals, std::vector<double> gains) {
  SelectedSet set;
  set.class_label = cache.class_label;
  set.k = cfg.k;
  set.gains = std::move(gains);
  set.ids.reserve(locals.size());
  for (int l : locals) set.ids.push_back(cache.candidate_ids[static_cast<std::size_t>(l)]);
  set.objective = objective_value(locals, cache, cfg);
  return set;
}

}  // namespace

SimilarityCache build_similarity_cache(const CandidatePool& pool, const std::string& label,
                                       const std::vector<ClassEmbedding>& classes,
                                       const SelectionConfig& cfg) {
  validate(cfg);
  if (classes.empty()) fail(ErrorKind::kInvalidInput, "no class embeddings");
  const std::vector<const ConceptCandidate*> cands = pool.of_class(label);
  for (const ConceptCandidate* c : cands)
    if (!c->has_embedding())
      fail(ErrorKind::kMissingEmbedding,
           "candidate " + std::to_string(c->id) + " has no embedding");

  SimilarityCache cache;
  cache.class_label = label;
  for (const ClassEmbedding& c : classes) cache.class_labels.push_back(c.label);
  for (const ConceptCandidate* c : cands) cache.candidate_ids.push_back(c->id);

  cache.class_concept = Matrix(classes.size(), cands.size());
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = 0; j < cands.size(); ++j)
      cache.class_concept(i, j) = cosine(classes[i].embedding, cands[j]->embedding);

  cache.concept_concept = Matrix(cands.size(), cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double phi = apply_phi(cosine(cands[i]->embedding, cands[j]->embedding), cfg.phi);
      cache.concept_concept(i, j) = phi;
      cache.concept_concept(j, i) = phi;
    }
  }
  return cache;
}

double diversity_score(const std::vector<int>& chosen, const SimilarityCache& cache,
                       const SelectionConfig& cfg) {
  validate(cfg);
  double total = 0.0;
  for (int c : chosen) total += diversity_of(c, cache, cfg);
  return total;
}

double coverage_score(const std::vector<int>& chosen, const SimilarityCache& cache,
                      const SelectionConfig& cfg) {
  validate(cfg);
  if (chosen.empty()) return 0.0;
  double total = 0.0;
  if (cfg.coverage_mode == CoverageMode::kFacilityLocation) {
    for (std::size_t c1 = 0; c1 < cache.pool_size(); ++c1) {
      double best = cache.concept_concept(c1, static_cast<std::size_t>(chosen.front()));
      for (std::size_t i = 1; i < chosen.size(); ++i)
        best = std::max(best, cache.concept_concept(c1, static_cast<std::size_t>(chosen[i])));
      total += best;
    }
  } else {
    for (std::size_t c1 = 0; c1 < cache.pool_size(); ++c1)
      for (int c2 : chosen) total += cache.concept_concept(c1, static_cast<std::size_t>(c2));
  }
  return total;
}

double objective_value(const std::vector<int>& chosen, const SimilarityCache& cache,
                       const SelectionConfig& cfg) {
  return cfg.lambda * diversity_score(chosen, cache, cfg) +
         coverage_score(chosen, cache, cfg);
}

nlohmann::json to_json(const SelectedSet& set) {
  nlohmann::json j;
  j["class"] = set.class_label;
  j["k"] = set.k;
  j["ids"] = set.ids;
  j["gains"] = set.gains;
  j["objective"] = set.objective;
  return j;
}

SelectedSet greedy_select(const SimilarityCache& cache, const SelectionConfig& cfg) {
  validate(cfg);
  const std::size_t n = cache.pool_size();
  if (n == 0) fail(ErrorKind::kEmptyClass, "empty candidate pool for " + cache.class_label);

  GreedyState state(cache, cfg);
  std::vector<int> locals;
  std::vector<double> gains;
  const std::size_t budget = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), n);
  while (locals.size() < budget) {
    int best = -1;
    double best_gain = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (state.chosen[x]) continue;
      const double g = state.gain_of(static_cast<int>(x), cache, cfg);
      if (best == -1 || g > best_gain) {
        best = static_cast<int>(x);
        best_gain = g;
      }
    }
    if (best == -1 || best_gain <= 0.0) break;
    state.accept(best, cache, cfg);
    locals.push_back(best);
    gains.push_back(best_gain);
  }
  return finish(cache, cfg, std::move(locals), std::move(gains));
}

SelectedSet lazy_greedy_select(const SimilarityCache& cache, const SelectionConfig& cfg) {
  validate(cfg);
  const std::size_t n = cache.pool_size();
  if (n == 0) fail(ErrorKind::kEmptyClass, "empty candidate pool for " + cache.class_label);

  struct Entry {
    double gain;
    int local;
    int round;  // round the gain was computed in
  };
  // Largest gain first; equal gains fall back to the smaller candidate id,
  // matching the naive tie-break.
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    return a.local > b.local;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> queue(worse);

  GreedyState state(cache, cfg);
  for (std::size_t x = 0; x < n; ++x)
    queue.push({state.gain_of(static_cast<int>(x), cache, cfg), static_cast<int>(x), 0});

  std::vector<int> locals;
  std::vector<double> gains;
  const std::size_t budget = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), n);
  int round = 0;
  while (locals.size() < budget && !queue.empty()) {
    Entry top = queue.top();
    queue.pop();
    if (top.round != round) {
      top.gain = state.gain_of(top.local, cache, cfg);
      top.round = round;
      queue.push(top);
      continue;
    }
    if (top.gain <= 0.0) break;
    state.accept(top.local, cache, cfg);
    locals.push_back(top.local);
    gains.push_back(top.gain);
    ++round;
  }
  return finish(cache, cfg, std::move(locals), std::move(gains));
}

SelectedSet brute_force_opt(const SimilarityCache& cache, const SelectionConfig& cfg) {
  validate(cfg);
  const std::size_t n = cache.pool_size();
  if (n == 0) fail(ErrorKind::kEmptyClass, "empty candidate pool for " + cache.class_label);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), n);

  double combos = 1.0;
  for (std::size_t i = 0; i < k; ++i)
    combos *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  if (combos > 1e6)
    fail(ErrorKind::kBudgetError, "subset enumeration too large: C(" + std::to_string(n) +
                                      "," + std::to_string(k) + ")");

  // prev_permutation on the mask walks combinations in ascending
  // lexicographic id order, so the first maximum wins ties.
  std::vector<char> mask(n, 0);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), 1);

  std::vector<int> best_combo;
  double best_value = 0.0;
  bool have_best = false;
  std::vector<int> combo;
  combo.reserve(k);
  do {
    combo.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) combo.push_back(static_cast<int>(i));
    const double value = objective_value(combo, cache, cfg);
    if (!have_best || value > best_value) {
      have_best = true;
      best_value = value;
      best_combo = combo;
    }
  } while (std::prev_permutation(mask.begin(), mask.end()));

  SelectedSet set = finish(cache, cfg, best_combo, {});
  set.gains.assign(best_combo.size(), 0.0);
  set.objective = best_value;
  return set;
}

SelectedSet greedy_select(const CandidatePool& pool, const std::string& label,
                          const std::vector<ClassEmbedding>& classes,
                          const SelectionConfig& cfg) {
  return greedy_select(build_similarity_cache(pool, label, classes, cfg), cfg);
}

}  // namespace cd
