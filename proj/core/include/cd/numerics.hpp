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

#ifndef CONCEPTDECOMP_CORE_NUMERICS_HPP_
#define CONCEPTDECOMP_CORE_NUMERICS_HPP_

#include <span>
#include <vector>

#include "cd/matrix.hpp"

namespace cd {

// Thin SVD of an arbitrary dense matrix. U is d x r, V^T is r x n with
// r = min(rows, cols); singular values are sorted descending.
struct SvdResult {
  Matrix u;
  std::vector<double> singular_values;
  Matrix v_t;

  // U[:, :k] * diag(s[:k]) * V^T[:k, :]
  Matrix reconstruct(std::size_t rank) const;
  Matrix reconstruct() const { return reconstruct(singular_values.size()); }
  // sqrt(sum of squared singular values past k): the Eckart-Young optimum
  // for a rank-k Frobenius approximation.
  double tail_energy(std::size_t rank) const;
};

SvdResult svd(const Matrix& m);

// Sum_i p_i log(p_i / q_i), natural log. Both arguments must be probability
// vectors of the same length (sums within 1e-9 of 1, entries >= 0). q is
// clamped below at 1e-12 before dividing.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Sample Pearson correlation. Throws DegenerateInput when either argument
// is constant (a correlation is undefined there, not zero).
double pearson(std::span<const double> a, std::span<const double> b);

// a.b / (|a||b|); throws DegenerateInput on zero vectors.
double cosine(std::span<const double> a, std::span<const double> b);

// Temperature softmax with max-subtraction. Output sums to 1.
std::vector<double> softmax(std::span<const double> x, double temperature = 1.0);

}  // namespace cd

#endif  // CONCEPTDECOMP_CORE_NUMERICS_HPP_
