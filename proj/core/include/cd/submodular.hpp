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

#ifndef CD_SUBMODULAR_HPP_
#define CD_SUBMODULAR_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "cd/candidates.hpp"
#include "cd/matrix.hpp"

namespace cd {

enum class CoverageMode {
  kFacilityLocation,  // sum over pool of max similarity to a chosen element
  kPairwiseSum,       // plain double sum, kept for replication
};

enum class PhiKind {
  kShiftedCosine,  // (1 + cos)/2, nonnegative
  kRawCosine,
};

enum class PsiKind {
  kIdentity,
  kSqrt,
  kLog1p,
};

struct SelectionConfig {
  int k = 10;               // candidates to keep per class
  double lambda = 1.0;      // weight of the diversity term
  double temperature = 1.0; // softmax temperature for p(y|c)
  CoverageMode coverage_mode = CoverageMode::kFacilityLocation;
  PhiKind phi = PhiKind::kShiftedCosine;
  PsiKind psi = PsiKind::kIdentity;
  // When true, diversity adds the raw signed quantity sum_y p log p
  // (negative entropy) instead of the entropy itself.
  bool signed_diversity = false;
};

// Per-class similarity tables. Row i of class_concept holds the raw cosine
// between class i's embedding and each candidate of the target class;
// concept_concept holds pairwise candidate similarities under the configured
// phi. Column/row j corresponds to candidate_ids[j] (ascending pool ids).
struct SimilarityCache {
  std::string class_label;
  std::vector<std::string> class_labels;
  std::vector<int> candidate_ids;
  Matrix class_concept;
  Matrix concept_concept;

  std::size_t pool_size() const { return candidate_ids.size(); }
};

struct ClassEmbedding {
  std::string label;
  std::vector<double> embedding;
};

SimilarityCache build_similarity_cache(const CandidatePool& pool, const std::string& label,
                                       const std::vector<ClassEmbedding>& classes,
                                       const SelectionConfig& cfg);

// Scores operate on cache-local candidate indices.
double diversity_score(const std::vector<int>& chosen, const SimilarityCache& cache,
                       const SelectionConfig& cfg);
double coverage_score(const std::vector<int>& chosen, const SimilarityCache& cache,
                      const SelectionConfig& cfg);
double objective_value(const std::vector<int>& chosen, const SimilarityCache& cache,
                       const SelectionConfig& cfg);

struct SelectedSet {
  std::string class_label;
  int k = 0;
  std::vector<int> ids;       // pool ids in greedy insertion order
  std::vector<double> gains;  // marginal gain at each step
  double objective = 0.0;
};

nlohmann::json to_json(const SelectedSet& set);

// Plain greedy: add the candidate with the largest marginal gain until k
// elements are chosen or no candidate improves the objective. Ties go to
// the smallest candidate id.
SelectedSet greedy_select(const SimilarityCache& cache, const SelectionConfig& cfg);

// Lazy-evaluation greedy with a stale-gain priority queue. Returns exactly
// the same selection as greedy_select.
SelectedSet lazy_greedy_select(const SimilarityCache& cache, const SelectionConfig& cfg);

// Exhaustive maximizer over all size-min(k, n) subsets. Throws BudgetError
// when the number of subsets exceeds 10^6. Ties resolved toward the
// lexicographically smallest id combination.
SelectedSet brute_force_opt(const SimilarityCache& cache, const SelectionConfig& cfg);

// Convenience wrappers that build the cache from a pool.
SelectedSet greedy_select(const CandidatePool& pool, const std::string& label,
                          const std::vector<ClassEmbedding>& classes,
                          const SelectionConfig& cfg);

}  // namespace cd

#endif  // CD_SUBMODULAR_HPP_
