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

#include "cd/toy_transformer.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "cd/error.hpp"
#include "cd/matrix.hpp"
#include "cd/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace {

using cd::Activation;
using cd::AttentionTrace;
using cd::EmbeddedExample;
using cd::ErrorKind;
using cd::Matrix;
using cd::ModelConfig;
using cd::Readout;
using cd::ToyTransformer;
using cd::TrainParams;
using cd_test::throws_kind;

Matrix random_matrix(std::size_t rows, std::size_t cols, cd::Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

void zero_weights(ToyTransformer& model) {
  cd::BlockWeights& w = model.mutable_weights();
  auto clear = [](Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = 0.0;
  };
  for (Matrix& m : w.wq) clear(m);
  for (Matrix& m : w.wk) clear(m);
  for (Matrix& m : w.wv) clear(m);
  for (Matrix& m : w.wo) clear(m);
  clear(w.w1);
  clear(w.w2);
  clear(w.w_cls);
  clear(w.embed);
}

double naive_activate(double x, Activation a) {
  if (a == Activation::kIdentity) return x;
  if (a == Activation::kRelu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

// Straight-line scalar reimplementation of the block, kept deliberately
// dumb so it can disagree with the production code path.
struct NaiveTrace {
  std::vector<std::vector<std::vector<double>>> attn;  // [head][i][j]
  std::vector<std::vector<double>> y;                  // [row][position]
  std::vector<double> logits;
  int readout_pos = 0;
};

NaiveTrace naive_forward(const ToyTransformer& model, const Matrix& prompt, const Matrix& input) {
  const ModelConfig& cfg = model.config();
  const cd::BlockWeights& w = model.weights();
  const int d = cfg.dim;
  const int dh = cfg.head_dim();
  const int np = static_cast<int>(prompt.cols());
  const int n = np + static_cast<int>(input.cols());

  auto t_at = [&](int a, int j) {
    return j < np ? prompt(static_cast<std::size_t>(a), static_cast<std::size_t>(j))
                  : input(static_cast<std::size_t>(a), static_cast<std::size_t>(j - np));
  };

  std::vector<std::vector<double>> x(static_cast<std::size_t>(d),
                                     std::vector<double>(static_cast<std::size_t>(n)));
  for (int a = 0; a < d; ++a)
    for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] = t_at(a, j);

  NaiveTrace out;
  for (int h = 0; h < cfg.heads; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    std::vector<std::vector<double>> q(static_cast<std::size_t>(dh),
                                       std::vector<double>(static_cast<std::size_t>(n)));
    auto k = q;
    auto v = q;
    for (int a = 0; a < dh; ++a)
      for (int j = 0; j < n; ++j) {
        double sq = 0.0;
        double sk = 0.0;
        double sv = 0.0;
        for (int b = 0; b < d; ++b) {
          sq += w.wq[hs](static_cast<std::size_t>(a), static_cast<std::size_t>(b)) * t_at(b, j);
          sk += w.wk[hs](static_cast<std::size_t>(a), static_cast<std::size_t>(b)) * t_at(b, j);
          sv += w.wv[hs](static_cast<std::size_t>(a), static_cast<std::size_t>(b)) * t_at(b, j);
        }
        q[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] = sq;
        k[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] = sk;
        v[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] = sv;
      }

    std::vector<std::vector<double>> attn(static_cast<std::size_t>(n),
                                          std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
      std::vector<double> scores(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < dh; ++a)
          s += q[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] *
               k[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)];
        scores[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(dh));
      }
      double hi = scores[0];
      for (double s : scores) hi = std::max(hi, s);
      double total = 0.0;
      for (int j = 0; j < n; ++j) {
        attn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            std::exp(scores[static_cast<std::size_t>(j)] - hi);
        total += attn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < n; ++j) attn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /= total;
    }

    for (int i = 0; i < n; ++i) {
      std::vector<double> z(static_cast<std::size_t>(dh), 0.0);
      for (int a = 0; a < dh; ++a)
        for (int j = 0; j < n; ++j)
          z[static_cast<std::size_t>(a)] +=
              attn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
              v[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)];
      for (int a = 0; a < d; ++a) {
        double s = 0.0;
        for (int b = 0; b < dh; ++b)
          s += w.wo[hs](static_cast<std::size_t>(a), static_cast<std::size_t>(b)) *
               z[static_cast<std::size_t>(b)];
        x[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] += s;
      }
    }
    out.attn.push_back(std::move(attn));
  }

  out.y = x;
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < cfg.ffn_dim; ++m) {
      double pre = 0.0;
      for (int a = 0; a < d; ++a)
        pre += w.w1(static_cast<std::size_t>(a), static_cast<std::size_t>(m)) *
               x[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)];
      const double act = naive_activate(pre, cfg.activation);
      for (int a = 0; a < d; ++a)
        out.y[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] +=
            act * w.w2(static_cast<std::size_t>(a), static_cast<std::size_t>(m));
    }

  out.readout_pos = cfg.readout == Readout::kFirstPrompt && np > 0 ? 0 : n - 1;
  out.logits.assign(static_cast<std::size_t>(cfg.n_classes), 0.0);
  for (int c = 0; c < cfg.n_classes; ++c)
    for (int a = 0; a < d; ++a)
      out.logits[static_cast<std::size_t>(c)] +=
          w.w_cls(static_cast<std::size_t>(c), static_cast<std::size_t>(a)) *
          out.y[static_cast<std::size_t>(a)][static_cast<std::size_t>(out.readout_pos)];
  return out;
}

void compare_against_naive(const ToyTransformer& model, const Matrix& prompt,
                           const Matrix& input) {
  const AttentionTrace trace = model.forward(prompt, input);
  const NaiveTrace naive = naive_forward(model, prompt, input);
  REQUIRE(trace.readout_pos == naive.readout_pos);
  REQUIRE(trace.logits.size() == naive.logits.size());
  for (std::size_t c = 0; c < naive.logits.size(); ++c)
    CHECK(std::abs(trace.logits[c] - naive.logits[c]) < 1e-9);
  REQUIRE(trace.attn.size() == naive.attn.size());
  const std::size_t n = trace.t.cols();
  for (std::size_t h = 0; h < naive.attn.size(); ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(std::abs(trace.attn[h](i, j) - naive.attn[h][i][j]) < 1e-9);
  for (std::size_t a = 0; a < trace.y.rows(); ++a)
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(trace.y(a, i) - naive.y[a][i]) < 1e-9);
}

// Two antipodal unit-mean classes along the classifier's own discriminating
// direction: a logistic probe on these inputs is perfect by construction.
std::vector<EmbeddedExample> separable_dataset(const ToyTransformer& model, int count,
                                               double noise, std::uint64_t seed) {
  const Matrix& w_cls = model.weights().w_cls;
  const std::size_t d = w_cls.cols();
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = w_cls(0, i) - w_cls(1, i);
  const std::vector<double> u = cd::l2_normalized(diff);

  cd::Rng rng(seed);
  std::vector<EmbeddedExample> out;
  for (int e = 0; e < count; ++e) {
    const int label = e % 2;
    std::vector<double> col(d);
    for (std::size_t i = 0; i < d; ++i)
      col[i] = (label == 0 ? u[i] : -u[i]) + noise * rng.gaussian();
    const std::vector<double> unit = cd::l2_normalized(col);
    EmbeddedExample ex;
    ex.input = Matrix(d, 1);
    ex.input.set_col(0, unit);
    ex.label = label;
    ex.id = "ex-" + std::to_string(e);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_SUITE("toy_transformer") {

TEST_CASE("configs are validated") {
  ModelConfig cfg;
  cfg.dim = 6;
  cfg.heads = 4;
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { ToyTransformer m(cfg); }));
  cfg.heads = 2;
  cfg.ffn_dim = 0;
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { ToyTransformer m(cfg); }));
}

TEST_CASE("zero weights give zero logits and uniform attention") {
  ModelConfig cfg;
  cfg.dim = 6;
  cfg.heads = 2;
  cfg.ffn_dim = 4;
  cfg.n_classes = 3;
  cfg.vocab_size = 8;
  cfg.seed = 1;
  ToyTransformer model(cfg);
  zero_weights(model);

  const Matrix prompt(6, 2);
  const Matrix input(6, 2);
  const AttentionTrace trace = model.forward(prompt, input);
  REQUIRE(trace.logits.size() == 3);
  for (double v : trace.logits) CHECK(v == 0.0);
  for (const Matrix& attn : trace.attn)
    for (std::size_t i = 0; i < attn.rows(); ++i)
      for (std::size_t j = 0; j < attn.cols(); ++j) CHECK(attn(i, j) == doctest::Approx(0.25));
}

TEST_CASE("a single token attends only to itself") {
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.heads = 1;
  cfg.ffn_dim = 2;
  cfg.vocab_size = 4;
  cfg.seed = 3;
  ToyTransformer model(cfg);
  cd::Rng rng(5);
  const Matrix input = random_matrix(4, 1, rng);
  const AttentionTrace trace = model.forward(Matrix(), input);
  REQUIRE(trace.attn.size() == 1);
  REQUIRE(trace.attn[0].rows() == 1);
  REQUIRE(trace.attn[0].cols() == 1);
  CHECK(trace.attn[0](0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trace.readout_pos == 0);
  CHECK(trace.n_prompt == 0);
}

TEST_CASE("forward matches an independent straight-line recomputation") {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 5;
  cfg.n_classes = 3;
  cfg.vocab_size = 16;
  cfg.seed = 42;
  ToyTransformer model(cfg);

  SUBCASE("three input tokens, no prompt") {
    compare_against_naive(model, Matrix(), model.embed_tokens({1, 5, 9}));
  }
  SUBCASE("prompt columns prepended") {
    cd::Rng rng(11);
    compare_against_naive(model, random_matrix(8, 2, rng), model.embed_tokens({3}));
  }
  SUBCASE("last-token readout") {
    cfg.readout = Readout::kLastToken;
    ToyTransformer last(cfg);
    cd::Rng rng(12);
    const Matrix prompt = random_matrix(8, 2, rng);
    const Matrix input = model.embed_tokens({2, 7});
    compare_against_naive(last, prompt, input);
    CHECK(last.forward(prompt, input).readout_pos == 3);
  }
  SUBCASE("identity and relu activations") {
    for (Activation act : {Activation::kIdentity, Activation::kRelu}) {
      cfg.activation = act;
      cfg.seed = 43;
      ToyTransformer variant(cfg);
      cd::Rng rng(13);
      compare_against_naive(variant, random_matrix(8, 1, rng), variant.embed_tokens({0, 4}));
    }
  }
}

TEST_CASE("attention rows are probability distributions") {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    ModelConfig cfg;
    cfg.dim = 12;
    cfg.heads = 3;
    cfg.ffn_dim = 6;
    cfg.seed = seed;
    ToyTransformer model(cfg);
    cd::Rng rng(seed + 100);
    const AttentionTrace trace =
        model.forward(random_matrix(12, 2, rng), random_matrix(12, 3, rng));
    for (const Matrix& attn : trace.attn)
      for (std::size_t i = 0; i < attn.rows(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < attn.cols(); ++j) {
          CHECK(attn(i, j) >= 0.0);
          total += attn(i, j);
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
      }
  }
}

TEST_CASE("ffn output stays in the span of the outer columns") {
  const Activation acts[] = {Activation::kIdentity, Activation::kRelu, Activation::kGelu};
  const int dims[] = {4, 8, 16};
  const int ffns[] = {1, 3, 8};
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig cfg;
    cfg.dim = dims[trial % 3];
    cfg.heads = trial % 2 == 0 ? 1 : 2;
    cfg.ffn_dim = ffns[(trial / 3) % 3];
    cfg.activation = acts[(trial / 9) % 3];
    cfg.readout = trial % 2 == 0 ? Readout::kFirstPrompt : Readout::kLastToken;
    cfg.seed = 2000 + static_cast<std::uint64_t>(trial);
    ToyTransformer model(cfg);
    cd::Rng rng(3000 + static_cast<std::uint64_t>(trial));
    const auto d = static_cast<std::size_t>(cfg.dim);
    const std::size_t np = static_cast<std::size_t>(trial % 3);
    const std::size_t ni = 1 + static_cast<std::size_t>(trial % 2);
    const Matrix prompt = np == 0 ? Matrix() : random_matrix(d, np, rng);
    const AttentionTrace trace = model.forward(prompt, random_matrix(d, ni, rng));
    CHECK(cd::verify_span_membership(model, trace) < 1e-9);
  }
}

TEST_CASE("rank one ffn output is parallel to the single outer column") {
  ModelConfig cfg;
  cfg.dim = 6;
  cfg.heads = 2;
  cfg.ffn_dim = 1;
  cfg.seed = 17;
  ToyTransformer model(cfg);
  cd::Rng rng(18);
  const AttentionTrace trace = model.forward(random_matrix(6, 1, rng), random_matrix(6, 2, rng));
  const cd::BlockWeights& w = model.weights();
  for (std::size_t i = 0; i < trace.ffn.cols(); ++i) {
    double pre = 0.0;
    for (std::size_t a = 0; a < 6; ++a) pre += w.w1(a, 0) * trace.x(a, i);
    const double act = naive_activate(pre, cfg.activation);
    for (std::size_t a = 0; a < 6; ++a)
      CHECK(std::abs(trace.ffn(a, i) - act * w.w2(a, 0)) < 1e-12);
  }
}

TEST_CASE("identity activation admits the exact two-term split") {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 4;
  cfg.activation = Activation::kIdentity;
  cfg.seed = 23;
  ToyTransformer model(cfg);
  cd::Rng rng(24);
  const AttentionTrace trace = model.forward(random_matrix(8, 2, rng), random_matrix(8, 2, rng));
  CHECK(cd::verify_two_term_split(model, trace) < 1e-9);

  cfg.activation = Activation::kGelu;
  ToyTransformer gelu(cfg);
  const AttentionTrace gelu_trace =
      gelu.forward(Matrix(), gelu.embed_tokens({1, 2}));
  CHECK(throws_kind(ErrorKind::kInvalidInput,
                    [&] { cd::verify_two_term_split(gelu, gelu_trace); }));
}

TEST_CASE("analytic gradients match finite differences") {
  SUBCASE("gelu") {
    ModelConfig cfg;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.ffn_dim = 8;
    cfg.n_classes = 3;
    cfg.seed = 21;
    ToyTransformer model(cfg);
    cd::Rng rng(100);
    CHECK(cd::gradient_check(model, random_matrix(16, 2, rng), random_matrix(16, 2, rng), 1) <
          1e-4);
  }
  SUBCASE("identity") {
    ModelConfig cfg;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.ffn_dim = 8;
    cfg.n_classes = 3;
    cfg.activation = Activation::kIdentity;
    cfg.seed = 22;
    ToyTransformer model(cfg);
    cd::Rng rng(101);
    CHECK(cd::gradient_check(model, random_matrix(16, 2, rng), random_matrix(16, 2, rng), 2) <
          1e-6);
  }
  SUBCASE("relu away from its kink") {
    bool found = false;
    for (std::uint64_t seed = 30; seed < 60 && !found; ++seed) {
      ModelConfig cfg;
      cfg.dim = 8;
      cfg.heads = 2;
      cfg.ffn_dim = 4;
      cfg.activation = Activation::kRelu;
      cfg.seed = seed;
      ToyTransformer model(cfg);
      cd::Rng rng(seed + 500);
      const Matrix prompt = random_matrix(8, 1, rng);
      const Matrix input = random_matrix(8, 2, rng);
      const AttentionTrace trace = model.forward(prompt, input);
      double closest = 1e300;
      for (std::size_t i = 0; i < trace.h_pre.rows(); ++i)
        for (std::size_t j = 0; j < trace.h_pre.cols(); ++j)
          closest = std::min(closest, std::abs(trace.h_pre(i, j)));
      if (closest < 1e-3) continue;
      found = true;
      CHECK(cd::gradient_check(model, prompt, input, 0) < 1e-4);
    }
    REQUIRE(found);
  }
  SUBCASE("last-token readout with a prompt") {
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.ffn_dim = 4;
    cfg.readout = Readout::kLastToken;
    cfg.seed = 25;
    ToyTransformer model(cfg);
    cd::Rng rng(102);
    CHECK(cd::gradient_check(model, random_matrix(8, 2, rng), random_matrix(8, 1, rng), 0) <
          1e-4);
  }
}

TEST_CASE("forward is bit-reproducible for a fixed seed") {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 4;
  cfg.n_classes = 3;
  cfg.seed = 42;
  ToyTransformer a(cfg);
  ToyTransformer b(cfg);
  CHECK(a.weights().w1 == b.weights().w1);
  CHECK(a.weights().embed == b.weights().embed);
  const Matrix input = a.embed_tokens({1, 2, 3});
  const std::vector<double> la = a.forward(Matrix(), input).logits;
  const std::vector<double> lb = b.forward(Matrix(), input).logits;
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i] == lb[i]);

  cfg.seed = 43;
  ToyTransformer c(cfg);
  const std::vector<double> lc = c.forward(Matrix(), c.embed_tokens({1, 2, 3})).logits;
  bool any_diff = false;
  for (std::size_t i = 0; i < la.size(); ++i) any_diff = any_diff || la[i] != lc[i];
  CHECK(any_diff);
}

TEST_CASE("forward and backward validate shapes") {
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.heads = 1;
  cfg.ffn_dim = 2;
  cfg.seed = 1;
  ToyTransformer model(cfg);
  CHECK(throws_kind(ErrorKind::kShapeError, [&] { model.forward(Matrix(), Matrix()); }));
  CHECK(throws_kind(ErrorKind::kShapeError, [&] { model.forward(Matrix(3, 1), Matrix()); }));
  CHECK(throws_kind(ErrorKind::kShapeError, [&] { model.forward(Matrix(), Matrix(5, 2)); }));
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { model.embed_tokens({99}); }));

  const AttentionTrace trace = model.forward(Matrix(), model.embed_tokens({0}));
  const std::vector<double> bad_grad(5, 0.0);
  CHECK(throws_kind(ErrorKind::kShapeError, [&] { model.backward(trace, bad_grad); }));
}

TEST_CASE("cross entropy matches the softmax closed form") {
  const cd::LossResult even = cd::cross_entropy({0.0, 0.0}, 0);
  CHECK(even.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(even.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(even.probs[1] == doctest::Approx(0.5).epsilon(1e-12));
  const std::vector<double> g = cd::cross_entropy_logit_grad(even.probs, 0);
  CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-12));

  const cd::LossResult skew = cd::cross_entropy({std::log(2.0), 0.0}, 1);
  CHECK(skew.probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(skew.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  CHECK(throws_kind(ErrorKind::kInvalidInput, [] { cd::cross_entropy({0.0, 0.0}, 2); }));
  CHECK(throws_kind(ErrorKind::kInvalidInput, [] { cd::cross_entropy({0.0, 0.0}, -1); }));
}

TEST_CASE("prompt tuning separates a linearly separable dataset") {
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 8;
  cfg.n_classes = 2;
  cfg.vocab_size = 4;
  cfg.readout = Readout::kLastToken;
  cfg.seed = 5;
  ToyTransformer model(cfg);
  const std::vector<EmbeddedExample> dataset = separable_dataset(model, 40, 0.05, 900);

  // The construction premise: a linear probe along w_cls row0 - row1 labels
  // every example correctly.
  const Matrix& w_cls = model.weights().w_cls;
  for (const EmbeddedExample& ex : dataset) {
    double proj = 0.0;
    for (std::size_t i = 0; i < 16; ++i) proj += (w_cls(0, i) - w_cls(1, i)) * ex.input(i, 0);
    CHECK((proj > 0.0) == (ex.label == 0));
  }

  TrainParams params;
  params.lr = 0.02;
  params.batch_size = 8;
  params.max_steps = 60;
  params.eval_every = 5;
  params.patience = 1000;
  params.val_fraction = 0.25;
  params.seed = 7;
  for (int n_prompt : {1, 2}) {
    const cd::TrainResult result = cd::p_tune(model, dataset, n_prompt, params);
    CHECK(result.prompt.rows() == 16);
    CHECK(result.prompt.cols() == static_cast<std::size_t>(n_prompt));
    CHECK(result.prompt.all_finite());
    CHECK(cd::prompt_accuracy(model, result.prompt, dataset) >= 0.95);
  }
}

TEST_CASE("zero learning rate leaves the prompt at its initialization") {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 4;
  cfg.n_classes = 2;
  cfg.seed = 6;
  ToyTransformer model(cfg);
  const std::vector<EmbeddedExample> dataset = separable_dataset(model, 8, 0.05, 901);

  TrainParams params;
  params.lr = 0.0;
  params.max_steps = 5;
  params.eval_every = 1;
  params.patience = 1000;
  params.val_fraction = 0.0;
  params.seed = 13;
  const cd::TrainResult short_run = cd::p_tune(model, dataset, 2, params);
  params.max_steps = 19;
  const cd::TrainResult long_run = cd::p_tune(model, dataset, 2, params);

  CHECK(short_run.prompt == long_run.prompt);
  CHECK(short_run.best_step == 0);
  CHECK(short_run.steps_run == 5);
  CHECK(long_run.steps_run == 19);

  // The initialization stream is the first thing drawn from the seed.
  cd::Rng rng(13);
  Matrix expected(8, 2);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 2; ++j) expected(i, j) = 0.02 * rng.gaussian();
  CHECK(short_run.prompt == expected);
}

TEST_CASE("tuning reduces the training loss through the prompt path") {
  // The readout sits on the first prompt position, so the only way to pull
  // the loss down is by moving the prompt itself.
  ModelConfig cfg;
  cfg.dim = 12;
  cfg.heads = 2;
  cfg.ffn_dim = 6;
  cfg.n_classes = 2;
  cfg.readout = Readout::kFirstPrompt;
  cfg.seed = 9;
  ToyTransformer model(cfg);

  cd::Rng rng(902);
  std::vector<EmbeddedExample> dataset;
  for (int e = 0; e < 16; ++e) {
    std::vector<double> col(12);
    for (double& v : col) v = rng.gaussian();
    EmbeddedExample ex;
    ex.input = Matrix(12, 1);
    ex.input.set_col(0, cd::l2_normalized(col));
    ex.label = 0;
    ex.id = "bias-" + std::to_string(e);
    dataset.push_back(std::move(ex));
  }

  TrainParams params;
  params.lr = 0.05;
  params.batch_size = 16;
  params.max_steps = 200;
  params.eval_every = 10;
  params.patience = 100000;
  params.val_fraction = 0.0;
  params.seed = 17;
  const cd::TrainResult result = cd::p_tune(model, dataset, 2, params);
  REQUIRE(result.train_curve.size() == 200);
  CHECK(result.train_curve.back() < 0.5 * result.train_curve.front());
  CHECK(result.best_step > 0);
  CHECK(result.best_val_loss < result.train_curve.front());
}

TEST_CASE("p_tune validates its inputs") {
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.heads = 1;
  cfg.ffn_dim = 2;
  cfg.seed = 1;
  ToyTransformer model(cfg);
  std::vector<EmbeddedExample> dataset = separable_dataset(model, 4, 0.05, 903);
  TrainParams params;
  params.max_steps = 2;

  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::p_tune(model, {}, 1, params); }));
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::p_tune(model, dataset, 0, params); }));

  TrainParams bad = params;
  bad.lr = -1.0;
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::p_tune(model, dataset, 1, bad); }));
  bad = params;
  bad.val_fraction = 1.0;
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::p_tune(model, dataset, 1, bad); }));
  bad = params;
  bad.batch_size = 0;
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::p_tune(model, dataset, 1, bad); }));

  std::vector<EmbeddedExample> wrong_dim = dataset;
  wrong_dim[0].input = Matrix(3, 1);
  CHECK(throws_kind(ErrorKind::kShapeError, [&] { cd::p_tune(model, wrong_dim, 1, params); }));
  std::vector<EmbeddedExample> wrong_label = dataset;
  wrong_label[0].label = 7;
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { cd::p_tune(model, wrong_label, 1, params); }));
}

TEST_CASE("divergent learning rates surface as training errors") {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 4;
  cfg.n_classes = 2;
  cfg.seed = 2;
  ToyTransformer model(cfg);
  const std::vector<EmbeddedExample> dataset = separable_dataset(model, 8, 0.05, 904);

  TrainParams params;
  params.lr = 1e160;
  params.batch_size = 4;
  params.max_steps = 5;
  params.eval_every = 1;
  params.patience = 100;
  params.val_fraction = 0.0;
  params.seed = 2;
  CHECK(throws_kind(ErrorKind::kTrainingError, [&] { cd::p_tune(model, dataset, 1, params); }));
}

TEST_CASE("prompt accuracy takes the first argmax") {
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.heads = 1;
  cfg.ffn_dim = 2;
  cfg.n_classes = 2;
  cfg.seed = 3;
  ToyTransformer model(cfg);
  zero_weights(model);
  // All logits are zero, so every prediction is class 0.
  std::vector<EmbeddedExample> dataset;
  for (int label : {0, 0, 1, 1}) {
    EmbeddedExample ex;
    ex.input = Matrix(4, 1);
    ex.label = label;
    dataset.push_back(ex);
  }
  CHECK(cd::prompt_accuracy(model, Matrix(4, 1), dataset) == doctest::Approx(0.5));
  CHECK(throws_kind(ErrorKind::kInvalidInput,
                    [&] { cd::prompt_accuracy(model, Matrix(4, 1), {}); }));
}

TEST_CASE("checkpoints restore the model") {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 4;
  cfg.n_classes = 3;
  cfg.vocab_size = 8;
  cfg.activation = Activation::kRelu;
  cfg.readout = Readout::kLastToken;
  cfg.seed = 77;
  ToyTransformer model(cfg);

  cd_test::TempDir dir;
  cd::save_checkpoint(model, dir.path());
  CHECK(std::filesystem::exists(dir.path() / "manifest.json"));
  CHECK(std::filesystem::exists(dir.path() / "wq1.cdem"));

  const ToyTransformer loaded = cd::load_checkpoint(dir.path());
  CHECK(loaded.config().dim == cfg.dim);
  CHECK(loaded.config().heads == cfg.heads);
  CHECK(loaded.config().ffn_dim == cfg.ffn_dim);
  CHECK(loaded.config().n_classes == cfg.n_classes);
  CHECK(loaded.config().vocab_size == cfg.vocab_size);
  CHECK(loaded.config().activation == cfg.activation);
  CHECK(loaded.config().readout == cfg.readout);
  CHECK(loaded.config().seed == cfg.seed);

  // Tensors are stored in binary32, so the first round trip is close and a
  // second round trip is exact.
  const std::vector<int> tokens = {1, 2, 5};
  const std::vector<double> before = model.forward(Matrix(), model.embed_tokens(tokens)).logits;
  const std::vector<double> once = loaded.forward(Matrix(), loaded.embed_tokens(tokens)).logits;
  REQUIRE(before.size() == once.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - once[i]) < 1e-5);

  cd_test::TempDir dir2;
  cd::save_checkpoint(loaded, dir2.path());
  const ToyTransformer again = cd::load_checkpoint(dir2.path());
  const std::vector<double> twice = again.forward(Matrix(), again.embed_tokens(tokens)).logits;
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i] == twice[i]);
  CHECK(cd_test::read_file(dir.path() / "w1.cdem") == cd_test::read_file(dir2.path() / "w1.cdem"));

  CHECK(throws_kind(ErrorKind::kFileError,
                    [&] { cd::load_checkpoint(dir.path() / "missing"); }));
  std::filesystem::remove(dir2.path() / "w1.cdem");
  CHECK(throws_kind(ErrorKind::kFileError, [&] { cd::load_checkpoint(dir2.path()); }));
  cd_test::write_file(dir2.path() / "manifest.json", "{\"config\": {}}");
  CHECK(throws_kind(ErrorKind::kFormatError, [&] { cd::load_checkpoint(dir2.path()); }));
}

}  // TEST_SUITE
