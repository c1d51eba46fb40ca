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

#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "cd/error.hpp"
#include "cd/matrix.hpp"
#include "cd/numerics.hpp"
#include "cd/rng.hpp"
#include "test_util.hpp"

using cd::ErrorKind;
using cd::Matrix;
using cd_test::throws_kind;

namespace {

Matrix random_matrix(int rows, int cols, cd::Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("numerics");

TEST_CASE("svd of the identity gives unit singular values") {
  const cd::SvdResult r = cd::svd(Matrix::identity(3));
  REQUIRE(r.singular_values.size() == 3);
  for (double s : r.singular_values) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd of diag(3,2,1) recovers the diagonal") {
  const Matrix m = Matrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  const cd::SvdResult r = cd::svd(m);
  REQUIRE(r.singular_values.size() == 3);
  CHECK(r.singular_values[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.singular_values[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.singular_values[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd reconstructs a random 16x8 matrix") {
  cd::Rng rng(42);
  const Matrix m = random_matrix(16, 8, rng);
  const cd::SvdResult r = cd::svd(m);
  CHECK((m - r.reconstruct()).frobenius_norm() < 1e-8);
  for (std::size_t i = 1; i < r.singular_values.size(); ++i)
    CHECK(r.singular_values[i] <= r.singular_values[i - 1]);
}

TEST_CASE("svd factors are orthonormal") {
  cd::Rng rng(7);
  const Matrix m = random_matrix(10, 6, rng);
  const cd::SvdResult r = cd::svd(m);
  const Matrix utu = r.u.transposed() * r.u;
  const Matrix vvt = r.v_t * r.v_t.transposed();
  CHECK((utu - Matrix::identity(utu.rows())).frobenius_norm() < 1e-8);
  CHECK((vvt - Matrix::identity(vvt.rows())).frobenius_norm() < 1e-8);
}

TEST_CASE("truncated svd error equals the tail energy") {
  cd::Rng rng(3);
  const Matrix m = random_matrix(9, 7, rng);
  const cd::SvdResult r = cd::svd(m);
  for (std::size_t k : {1u, 3u, 5u}) {
    const double err = (m - r.reconstruct(k)).frobenius_norm();
    CHECK(err == doctest::Approx(r.tail_energy(k)).epsilon(1e-8));
  }
}

TEST_CASE("svd rejects non-finite input") {
  Matrix m(2, 2);
  m(0, 0) = std::nan("");
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::svd(m); }));
}

TEST_CASE("kl divergence closed forms") {
  const std::vector<double> half = {0.5, 0.5};
  CHECK(cd::kl_divergence(half, half) == doctest::Approx(0.0).epsilon(1e-12));
  const std::vector<double> point = {1.0, 0.0};
  CHECK(cd::kl_divergence(point, half) == doctest::Approx(0.693147).epsilon(1e-5));
  const std::vector<double> p = {0.25, 0.75};
  const std::vector<double> q = {0.75, 0.25};
  CHECK(cd::kl_divergence(p, q) == doctest::Approx(0.549306).epsilon(1e-5));
}

TEST_CASE("kl divergence stays finite under the q floor") {
  const std::vector<double> p = {0.5, 0.5};
  const std::vector<double> q = {1.0, 0.0};
  const double v = cd::kl_divergence(p, q);
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
}

TEST_CASE("kl divergence rejects bad inputs") {
  const std::vector<double> p = {0.5, 0.5};
  const std::vector<double> q3 = {0.3, 0.3, 0.4};
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::kl_divergence(p, q3); }));
  const std::vector<double> not_dist = {0.9, 0.9};
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::kl_divergence(not_dist, p); }));
}

TEST_CASE("kl divergence is non-negative over random pairs") {
  cd::Rng rng(100);
  for (int t = 0; t < 1000; ++t) {
    const int n = rng.uniform_int(2, 8);
    std::vector<double> p(static_cast<std::size_t>(n)), q(static_cast<std::size_t>(n));
    double ps = 0.0, qs = 0.0;
    for (int i = 0; i < n; ++i) {
      p[static_cast<std::size_t>(i)] = rng.uniform() + 1e-3;
      q[static_cast<std::size_t>(i)] = rng.uniform() + 1e-3;
      ps += p[static_cast<std::size_t>(i)];
      qs += q[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < n; ++i) {
      p[static_cast<std::size_t>(i)] /= ps;
      q[static_cast<std::size_t>(i)] /= qs;
    }
    CHECK(cd::kl_divergence(p, q) >= -1e-12);
  }
}

TEST_CASE("pearson closed forms") {
  const std::vector<double> a = {1, 2, 3};
  CHECK(cd::pearson(a, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cd::pearson(a, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {1, 3, 2, 4};
  CHECK(cd::pearson(x, y) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("pearson rejects constant arrays") {
  const std::vector<double> c = {2, 2, 2};
  const std::vector<double> v = {1, 2, 3};
  CHECK(throws_kind(ErrorKind::kDegenerateInput, [&] { cd::pearson(c, v); }));
  CHECK(throws_kind(ErrorKind::kDegenerateInput, [&] { cd::pearson(v, c); }));
}

TEST_CASE("pearson is invariant under positive affine maps") {
  cd::Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a[static_cast<std::size_t>(i)] = rng.gaussian();
      b[static_cast<std::size_t>(i)] = rng.gaussian();
    }
    const double base = cd::pearson(a, b);
    std::vector<double> a2 = a;
    for (double& x : a2) x = 3.5 * x + 11.0;
    CHECK(cd::pearson(a2, b) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("cosine closed forms") {
  const std::vector<double> ones = {1, 1};
  const std::vector<double> ex = {1, 0};
  CHECK(cd::cosine(ones, ones) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cd::cosine(ex, std::vector<double>{0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cd::cosine(ones, ex) == doctest::Approx(0.70711).epsilon(1e-4));
}

TEST_CASE("cosine rejects zero vectors") {
  const std::vector<double> z = {0, 0};
  const std::vector<double> v = {1, 2};
  CHECK(throws_kind(ErrorKind::kDegenerateInput, [&] { cd::cosine(z, v); }));
}

TEST_CASE("softmax closed forms and stability") {
  const std::vector<double> zeros = {0, 0};
  const std::vector<double> s1 = cd::softmax(zeros);
  CHECK(s1[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s1[1] == doctest::Approx(0.5).epsilon(1e-12));

  const std::vector<double> big = {1000, 1000, 1000};
  const std::vector<double> s2 = cd::softmax(big);
  for (double v : s2) {
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  const std::vector<double> ln2 = {std::log(2.0), 0.0};
  const std::vector<double> s3 = cd::softmax(ln2);
  CHECK(s3[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(s3[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and is shift invariant") {
  cd::Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(5);
    for (double& v : x) v = 10.0 * rng.gaussian();
    const std::vector<double> s = cd::softmax(x);
    double sum = 0.0;
    for (double v : s) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> shifted = x;
    for (double& v : shifted) v += 123.456;
    const std::vector<double> s2 = cd::softmax(shifted);
    for (std::size_t i = 0; i < s.size(); ++i)
      CHECK(s2[i] == doctest::Approx(s[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax temperature sharpens and flattens") {
  const std::vector<double> x = {1.0, 0.0};
  const std::vector<double> sharp = cd::softmax(x, 0.1);
  const std::vector<double> flat = cd::softmax(x, 10.0);
  CHECK(sharp[0] > 0.99);
  CHECK(flat[0] < 0.53);
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::softmax(x, 0.0); }));
}

TEST_SUITE_END();
