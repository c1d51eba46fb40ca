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

#include "cd/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "cd/error.hpp"

namespace cd {
namespace {

constexpr double kKlFloor = 1e-12;
constexpr double kDistributionTol = 1e-9;

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j)
      m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = e(i, j);
  return m;
}

void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorKind::kInvalidInput, std::string(name) + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionTol)
    fail(ErrorKind::kInvalidInput, std::string(name) + " does not sum to 1");
}

}  // namespace

Matrix SvdResult::reconstruct(std::size_t rank) const {
  const std::size_t r = std::min(rank, singular_values.size());
  Matrix out(u.rows(), v_t.cols(), 0.0);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < r; ++k)
        acc += u(i, k) * singular_values[k] * v_t(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

double SvdResult::tail_energy(std::size_t rank) const {
  double acc = 0.0;
  for (std::size_t k = rank; k < singular_values.size(); ++k)
    acc += singular_values[k] * singular_values[k];
  return std::sqrt(acc);
}

SvdResult svd(const Matrix& m) {
  if (m.empty()) fail(ErrorKind::kInvalidInput, "svd of empty matrix");
  if (!m.all_finite()) fail(ErrorKind::kInvalidInput, "svd input has non-finite entries");

  Eigen::JacobiSVD<Eigen::MatrixXd> solver(to_eigen(m),
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.u = from_eigen(solver.matrixU());
  out.v_t = from_eigen(solver.matrixV().transpose());
  const auto& sv = solver.singularValues();
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    fail(ErrorKind::kInvalidInput, "kl_divergence length mismatch");
  if (p.empty()) fail(ErrorKind::kInvalidInput, "kl_divergence of empty vectors");
  check_distribution(p, "p");
  check_distribution(q, "q");

  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;  // 0 log 0 -> 0
    const double qi = std::max(q[i], kKlFloor);
    acc += p[i] * std::log(p[i] / qi);
  }
  return acc;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kInvalidInput, "pearson length mismatch");
  if (a.size() < 2) fail(ErrorKind::kInvalidInput, "pearson needs at least 2 samples");

  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;

  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0)
    fail(ErrorKind::kDegenerateInput, "pearson of a constant array is undefined");
  return cov / std::sqrt(var_a * var_b);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kInvalidInput, "cosine length mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0)
    fail(ErrorKind::kDegenerateInput, "cosine with a zero vector is undefined");
  return dot(a, b) / (na * nb);
}

std::vector<double> softmax(std::span<const double> x, double temperature) {
  if (x.empty()) fail(ErrorKind::kInvalidInput, "softmax of empty vector");
  if (!(temperature > 0.0))
    fail(ErrorKind::kInvalidInput, "softmax temperature must be positive");
  for (double v : x)
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidInput, "softmax input must be finite");

  double max_v = x[0];
  for (double v : x) max_v = std::max(max_v, v);

  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp((x[i] - max_v) / temperature);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace cd
