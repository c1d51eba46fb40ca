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

#include "cd/decomposer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cd/error.hpp"
#include "cd/numerics.hpp"
#include "cd/tensor_io.hpp"

namespace cd {
namespace {

Matrix pseudoinverse_apply(const Matrix& c, const Matrix& p) {
  // pinv(C) * P through the singular value decomposition of C.
  const SvdResult svd_c = svd(c);
  const double cutoff = 1e-12 * (svd_c.singular_values.empty() ? 1.0
                                                               : svd_c.singular_values.front());
  const Matrix ut_p = svd_c.u.transposed() * p;  // r x n_prompt
  Matrix scaled = ut_p;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    const double s = svd_c.singular_values[i];
    const double inv = s > cutoff ? 1.0 / s : 0.0;
    for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(i, j) *= inv;
  }
  return svd_c.v_t.transposed() * scaled;
}

double fit_residual(const Matrix& c, const Matrix& q, const Matrix& p) {
  return (c * q - p).frobenius_norm();
}

}  // namespace

Matrix solve_q_least_squares(const Matrix& c, const Matrix& p) {
  if (c.rows() != p.rows()) fail(ErrorKind::kShapeError, "concept/prompt row mismatch");
  return pseudoinverse_apply(c, p);
}

Matrix solve_q_gradient_descent(const Matrix& c, const Matrix& p, const Matrix& q_start,
                                int max_steps, double grad_tol) {
  if (c.rows() != p.rows()) fail(ErrorKind::kShapeError, "concept/prompt row mismatch");
  if (q_start.rows() != c.cols() || q_start.cols() != p.cols())
    fail(ErrorKind::kShapeError, "bad start shape for the coefficient matrix");

  const SvdResult svd_c = svd(c);
  const double sigma_max = svd_c.singular_values.empty() ? 0.0 : svd_c.singular_values.front();
  if (sigma_max == 0.0) return q_start;  // zero C: objective is constant
  const double step = 1.0 / (2.0 * sigma_max * sigma_max);

  const Matrix ct = c.transposed();
  Matrix q = q_start;
  for (int it = 0; it < max_steps; ++it) {
    const Matrix grad = (ct * (c * q - p)).scaled(2.0);
    if (grad.frobenius_norm() < grad_tol) break;
    q -= grad.scaled(step);
  }
  return q;
}

Decomposition frobenius_fit(const Matrix& p, int n_concepts, double epsilon) {
  if (p.empty()) fail(ErrorKind::kInvalidInput, "empty prompt matrix");
  if (n_concepts < 1) fail(ErrorKind::kInvalidInput, "concept count must be >= 1");
  if (!(epsilon > 0.0)) fail(ErrorKind::kInvalidInput, "epsilon must be positive");

  Decomposition dec;
  dec.provenance = Provenance::kFrobeniusFit;
  if (static_cast<std::size_t>(n_concepts) == p.cols()) {
    dec.c = p;
    dec.q = Matrix::identity(p.cols());
    dec.residual = 0.0;
  } else {
    const SvdResult s = svd(p);
    const std::size_t keep =
        std::min<std::size_t>(static_cast<std::size_t>(n_concepts), s.singular_values.size());
    dec.c = Matrix(p.rows(), static_cast<std::size_t>(n_concepts));
    dec.q = Matrix(static_cast<std::size_t>(n_concepts), p.cols());
    for (std::size_t k = 0; k < keep; ++k) {
      for (std::size_t i = 0; i < p.rows(); ++i)
        dec.c(i, k) = s.u(i, k) * s.singular_values[k];
      for (std::size_t j = 0; j < p.cols(); ++j) dec.q(k, j) = s.v_t(k, j);
    }
    dec.residual = fit_residual(dec.c, dec.q, p);
  }
  dec.within_epsilon = dec.residual * dec.residual <= epsilon;
  for (std::size_t i = 0; i < dec.c.cols(); ++i)
    dec.concept_ids.push_back(static_cast<int>(i));
  return dec;
}

Decomposition frobenius_fit_with_concepts(const Matrix& p, const Matrix& concept_embeddings,
                                          double epsilon) {
  if (p.empty()) fail(ErrorKind::kInvalidInput, "empty prompt matrix");
  if (concept_embeddings.empty()) fail(ErrorKind::kInvalidInput, "empty concept matrix");
  if (!(epsilon > 0.0)) fail(ErrorKind::kInvalidInput, "epsilon must be positive");
  if (concept_embeddings.rows() != p.rows())
    fail(ErrorKind::kShapeError, "concept/prompt row mismatch");

  Decomposition dec;
  dec.provenance = Provenance::kFrobeniusFit;
  dec.c = concept_embeddings;
  dec.q = solve_q_least_squares(dec.c, p);
  dec.residual = fit_residual(dec.c, dec.q, p);
  dec.within_epsilon = dec.residual * dec.residual <= epsilon;
  for (std::size_t i = 0; i < dec.c.cols(); ++i)
    dec.concept_ids.push_back(static_cast<int>(i));
  return dec;
}

Matrix concept_embedding_matrix(const CandidatePool& pool, const std::vector<int>& ids) {
  if (ids.empty()) fail(ErrorKind::kInvalidInput, "no concept ids");
  const ConceptCandidate& first = pool.by_id(ids.front());
  if (!first.has_embedding())
    fail(ErrorKind::kMissingEmbedding, "candidate " + std::to_string(ids.front()));
  Matrix c(first.embedding.size(), ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const ConceptCandidate& cand = pool.by_id(ids[j]);
    if (!cand.has_embedding())
      fail(ErrorKind::kMissingEmbedding, "candidate " + std::to_string(ids[j]));
    if (cand.embedding.size() != c.rows())
      fail(ErrorKind::kShapeError, "inconsistent embedding dims in pool");
    c.set_col(j, cand.embedding);
  }
  return c;
}

std::vector<int> ordered_selected_ids(const std::vector<SelectedSet>& selected) {
  std::vector<int> ids;
  for (const SelectedSet& s : selected) ids.insert(ids.end(), s.ids.begin(), s.ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    fail(ErrorKind::kInvalidInput, "selected sets share a candidate id");
  return ids;
}

std::vector<double> concept_keys(const Decomposition& dec) {
  std::vector<double> keys(dec.q.rows(), 0.0);
  for (std::size_t i = 0; i < dec.q.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < dec.q.cols(); ++j) sum += dec.q(i, j);
    keys[i] = sum;
  }
  return keys;
}

double fidelity_kl(const ToyTransformer& model, const Matrix& teacher_prompt,
                   const Matrix& student_prompt, const std::vector<EmbeddedExample>& dataset) {
  if (dataset.empty()) fail(ErrorKind::kInvalidInput, "empty dataset");
  double total = 0.0;
  for (const EmbeddedExample& ex : dataset) {
    const std::vector<double> teacher =
        softmax(model.forward(teacher_prompt, ex.input).logits);
    const std::vector<double> student =
        softmax(model.forward(student_prompt, ex.input).logits);
    total += kl_divergence(teacher, student);
  }
  return total / static_cast<double>(dataset.size());
}

void save_decomposition(const Decomposition& dec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  save_matrix(dir / "c.cdem", dec.c);
  save_matrix(dir / "q.cdem", dec.q);
  nlohmann::json j;
  j["concept_ids"] = dec.concept_ids;
  j["concept_texts"] = dec.concept_texts;
  j["concept_classes"] = dec.concept_classes;
  j["provenance"] = dec.provenance == Provenance::kCdTuned ? "cd_tuned" : "frobenius_fit";
  j["residual"] = dec.residual;
  j["within_epsilon"] = dec.within_epsilon;
  std::ofstream out(dir / "decomposition.json");
  if (!out) fail(ErrorKind::kFileError, "cannot write decomposition manifest");
  out << j.dump(2) << "\n";
}

Decomposition load_decomposition(const std::filesystem::path& dir) {
  std::ifstream in(dir / "decomposition.json");
  if (!in) fail(ErrorKind::kFileError, "cannot open decomposition manifest in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::kFormatError, "malformed decomposition manifest");

  Decomposition dec;
  dec.c = load_matrix(dir / "c.cdem");
  dec.q = load_matrix(dir / "q.cdem");
  dec.concept_ids = j.value("concept_ids", std::vector<int>{});
  dec.concept_texts = j.value("concept_texts", std::vector<std::string>{});
  dec.concept_classes = j.value("concept_classes", std::vector<std::string>{});
  dec.provenance =
      j.value("provenance", "frobenius_fit") == std::string("cd_tuned") ? Provenance::kCdTuned
                                                                        : Provenance::kFrobeniusFit;
  dec.residual = j.value("residual", 0.0);
  dec.within_epsilon = j.value("within_epsilon", true);
  if (dec.c.cols() != dec.q.rows())
    fail(ErrorKind::kShapeError, "decomposition tensors disagree on concept count");
  return dec;
}

}  // namespace cd
