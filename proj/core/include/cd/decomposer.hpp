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

#ifndef CD_DECOMPOSER_HPP_
#define CD_DECOMPOSER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cd/candidates.hpp"
#include "cd/matrix.hpp"
#include "cd/submodular.hpp"
#include "cd/toy_transformer.hpp"

namespace cd {

enum class Provenance {
  kFrobeniusFit,
  kCdTuned,
};

// A factorization prompt = C * Q. Column i of C belongs to concept_ids[i];
// the metadata vectors stay aligned with C's columns.
struct Decomposition {
  Matrix c;  // dim x n_concepts
  Matrix q;  // n_concepts x n_prompt
  std::vector<int> concept_ids;
  std::vector<std::string> concept_texts;
  std::vector<std::string> concept_classes;
  Provenance provenance = Provenance::kFrobeniusFit;
  double residual = 0.0;       // Frobenius norm of C*Q - P at fit time
  bool within_epsilon = true;  // squared residual <= requested epsilon

  Matrix prompt() const { return c * q; }
  std::size_t n_concepts() const { return c.cols(); }
};

// Least-squares Q for fixed C via the pseudoinverse.
Matrix solve_q_least_squares(const Matrix& c, const Matrix& p);

// The same convex subproblem solved iteratively: steepest descent with the
// 1/L step (L twice the squared top singular value of C). Used to check
// convexity behaviorally from arbitrary starts.
Matrix solve_q_gradient_descent(const Matrix& c, const Matrix& p, const Matrix& q_start,
                                int max_steps = 10000, double grad_tol = 1e-12);

// Factorizes P with freely chosen C. Width equal to the prompt width uses
// the exact construction C=P, Q=I; otherwise a truncated singular value
// decomposition, which is optimal in the Frobenius norm.
Decomposition frobenius_fit(const Matrix& p, int n_concepts, double epsilon);

// Factorizes P with C frozen to the given concept embedding columns; only
// the convex Q subproblem is solved. An unreachable epsilon lowers
// within_epsilon instead of failing.
Decomposition frobenius_fit_with_concepts(const Matrix& p, const Matrix& concept_embeddings,
                                          double epsilon);

// Embedding columns of the given pool ids, in the given order.
Matrix concept_embedding_matrix(const CandidatePool& pool, const std::vector<int>& ids);

// Union of the selected ids across classes, ascending.
std::vector<int> ordered_selected_ids(const std::vector<SelectedSet>& selected);

// Row sums of Q: the ranking key of each concept.
std::vector<double> concept_keys(const Decomposition& dec);

struct TuneConfig {
  double mu = 0.5;  // weight of the fidelity term, in [0,1]
  double lr = 1e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 16;
  int max_steps = 2000;
  int patience = 100;
  int eval_every = 1;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  bool freeze_c = false;
};

struct TuneResult {
  Decomposition decomposition;
  std::vector<double> train_curve;  // total loss per step
  std::vector<double> val_curve;
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  double final_fidelity_kl = 0.0;  // mean teacher/student KL of the result
  int best_step = 0;
  int steps_run = 0;
};

// Distills the tuned prompt p_star into concept space: C starts from the
// encoder embeddings of the selected concepts, Q from the least-squares
// read of p_star, then both (or Q alone with freeze_c) minimize
// mu * KL(teacher || student) + task cross entropy.
TuneResult cd_tune(const ToyTransformer& model, const Matrix& p_star,
                   const std::vector<SelectedSet>& selected, const CandidatePool& pool,
                   const std::vector<EmbeddedExample>& dataset, const TuneConfig& cfg);

// Mean KL between predictive distributions under two prompts.
double fidelity_kl(const ToyTransformer& model, const Matrix& teacher_prompt,
                   const Matrix& student_prompt, const std::vector<EmbeddedExample>& dataset);

struct ConceptMention {
  int id = -1;
  std::string text;
  double key = 0.0;
  double input_cosine = 0.0;
};

struct ExplanationReport {
  std::string input_id;
  int predicted_class = 0;
  std::string predicted_label;
  std::vector<ConceptMention> concepts;  // sorted by key descending
  bool truncated = false;                // requested more concepts than the class has
  double mean_input_cosine = 0.0;
};

nlohmann::json to_json(const ExplanationReport& report);

// Ranks the predicted class's concepts by key and reports the top ones with
// their input similarity (cosine against the pooled input embedding in
// encoder space).
ExplanationReport explain(const ToyTransformer& model, const Decomposition& dec,
                          const EmbeddedExample& input, const CandidatePool& pool,
                          const std::vector<std::string>& class_labels, int top_k = 3);

enum class YPrimeRule {
  kRunnerUp,       // second most probable class
  kLeastProbable,  // lowest probability class
  kSelf,           // keep the predicted class (diagnostic)
};

struct AttackCase {
  std::string input_id;
  int predicted = 0;
  int attacked = 0;
  double pre_similarity = 0.0;
  double post_similarity = 0.0;
};

struct AttackReport {
  std::vector<AttackCase> cases;
  double mean_pre = 0.0;
  double mean_post = 0.0;
  double delta = 0.0;  // mean_post - mean_pre

  bool empty() const { return cases.empty(); }
};

nlohmann::json to_json(const AttackReport& report);

// Misclassified examples under the decomposition's prompt.
std::vector<EmbeddedExample> find_bad_cases(const ToyTransformer& model,
                                            const Decomposition& dec,
                                            const std::vector<EmbeddedExample>& dataset);

// For each bad case, swaps the explanation to the attacked class's top
// concepts, rebuilds the prompt from them alone, and compares the mean
// input/explanation similarity before and after.
AttackReport causal_attack(const ToyTransformer& model, const Decomposition& dec,
                           const std::vector<EmbeddedExample>& bad_cases,
                           const CandidatePool& pool,
                           const std::vector<std::string>& class_labels,
                           YPrimeRule rule = YPrimeRule::kRunnerUp, int top_k = 3);

// Decomposition artifact: JSON manifest plus tensor files for C and Q.
void save_decomposition(const Decomposition& dec, const std::filesystem::path& dir);
Decomposition load_decomposition(const std::filesystem::path& dir);

}  // namespace cd

#endif  // CD_DECOMPOSER_HPP_
