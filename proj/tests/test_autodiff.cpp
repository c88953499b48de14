#include <catch2/catch_amalgamated.hpp>

#include <nodenorm/autodiff.hpp>

#include "support/oracles.hpp"

using namespace nodenorm;
using Catch::Approx;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double v : values) m(0, j++) = v;
  return m;
}

/// Moves entries away from zero so ReLU kinks are not straddled by the
/// finite-difference stencil.
Matrix off_kink(Matrix m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double& v = m.data()[i];
    if (std::abs(v) < 0.1) v = v < 0 ? v - 0.1 : v + 0.1;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul values and gradients", "[autodiff]") {
  Tape tape;
  Var a = tape.leaf(row({1, 2}));
  Matrix bm(2, 1);
  bm << 3, 4;
  Var b = tape.leaf(bm);
  Var c = matmul(a, b);
  CHECK(c.value()(0, 0) == 11.0);
  tape.backward(sum(c));
  CHECK(a.grad() == row({3, 4}));
  Matrix expected_b(2, 1);
  expected_b << 1, 2;
  CHECK(b.grad() == expected_b);

  Tape t2;
  Var x = t2.leaf(Matrix::Random(3, 2));
  Var z = t2.leaf(Matrix::Zero(2, 4));
  Var y = matmul(x, z);
  CHECK(y.value().isZero(0.0));
  t2.backward(sum(y));
  CHECK(x.grad().isZero(0.0));

  Tape t3;
  Var id = t3.constant(Matrix::Identity(3, 3));
  Var m = t3.constant(Matrix::Random(3, 2));
  CHECK(matmul(id, m).value() == m.value());
  CHECK_THROWS_AS(matmul(t3.constant(Matrix::Zero(2, 3)), t3.constant(Matrix::Zero(2, 3))), ShapeError);
}

TEST_CASE("relu values and subgradient", "[autodiff]") {
  Tape tape;
  Var x = tape.leaf(row({-1, 2, 0}));
  Var y = relu(x);
  CHECK(y.value() == row({0, 2, 0}));
  tape.backward(sum(y));
  CHECK(x.grad() == row({0, 1, 0}));

  Tape t2;
  Var h = t2.leaf(row({0.5}));
  Var out = scale(relu(h), 3.0);
  t2.backward(sum(out));
  CHECK(h.grad()(0, 0) == 3.0);

  Tape t3;
  Var neg = t3.leaf(row({-1, -2, -3}));
  Var r = relu(neg);
  CHECK(r.value().isZero(0.0));
  t3.backward(sum(r));
  CHECK(neg.grad().isZero(0.0));
}

TEST_CASE("dropout modes", "[autodiff]") {
  Rng rng(4);
  Tape tape;
  const Matrix m = Matrix::Random(4, 5);
  Var x = tape.constant(m);
  CHECK(dropout(x, 0.0, rng, true).value() == m);
  CHECK(dropout(x, 0.7, rng, false).value() == m);
  CHECK_THROWS_AS(dropout(x, 1.0, rng, true), ConfigError);
  CHECK_THROWS_AS(dropout(x, -0.1, rng, true), ConfigError);

  const Matrix d = dropout(x, 0.5, rng, true).value();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = d.data()[i];
    CHECK((v == 0.0 || v == Approx(2.0 * m.data()[i])));
  }
}

TEST_CASE("dropout is unbiased over many draws", "[autodiff]") {
  Rng rng(99);
  Tape tape;
  Matrix m(1, 3);
  m << 1.0, -2.0, 5.0;
  Var x = tape.constant(m);
  Matrix total = Matrix::Zero(1, 3);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) total += dropout(x, 0.5, rng, true).value();
  total /= draws;
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(total(0, j) - m(0, j)) <= 0.02 * std::abs(m(0, j)) + 0.02);
}

TEST_CASE("softmax cross entropy values", "[autodiff]") {
  const std::vector<int> labels{0};
  const std::vector<bool> mask{true};
  Tape tape;
  CHECK(softmax_cross_entropy(tape.constant(Matrix::Zero(1, 5)), labels, mask).value()(0, 0) ==
        Approx(std::log(5.0)).epsilon(1e-14));
  CHECK(softmax_cross_entropy(tape.constant(row({0, std::log(3.0)})), labels, mask).value()(0, 0) ==
        Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(softmax_cross_entropy(tape.constant(row({1000, 0})), labels, mask).value()(0, 0) ==
        Approx(0.0).margin(1e-300));
  CHECK_THROWS_AS(softmax_cross_entropy(tape.constant(row({1, 0})), labels, std::vector<bool>{false}),
                  ValidationError);
}

TEST_CASE("softmax cross entropy stays finite for large logits", "[autodiff]") {
  Rng rng(5);
  Tape tape;
  const Matrix logits = oracle::random_matrix(10, 4, rng, 1e4);
  std::vector<int> labels(10);
  for (int i = 0; i < 10; ++i) labels[i] = i % 4;
  Var l = tape.leaf(logits);
  Var loss = softmax_cross_entropy(l, labels, std::vector<bool>(10, true));
  CHECK(std::isfinite(loss.value()(0, 0)));
  tape.backward(loss);
  CHECK(l.grad().allFinite());
}

TEST_CASE("softmax cross entropy gradient is zero outside the mask", "[autodiff]") {
  Rng rng(6);
  Tape tape;
  Var l = tape.leaf(oracle::random_matrix(4, 3, rng));
  const std::vector<int> labels{0, 1, 2, 0};
  tape.backward(softmax_cross_entropy(l, labels, {true, false, true, false}));
  CHECK(l.grad().row(1).isZero(0.0));
  CHECK(l.grad().row(3).isZero(0.0));
  // Each masked row of (softmax - onehot) / |mask| sums to zero.
  CHECK(std::abs(l.grad().row(0).sum()) < 1e-15);
}

TEST_CASE("l1 penalty value and sign subgradient", "[autodiff]") {
  Tape tape;
  Var w = tape.leaf(row({1, -2, 0}));
  const std::vector<Var> params{w};
  CHECK(l1_penalty(params, 0.0).value()(0, 0) == 0.0);
  Var p = l1_penalty(params, 0.5);
  CHECK(p.value()(0, 0) == 1.5);
  tape.backward(p);
  CHECK(w.grad() == row({0.5, -0.5, 0.0}));
}

TEST_CASE("glorot init bounds, determinism and variance", "[autodiff]") {
  Rng a(17), b(17);
  const Matrix w1 = glorot_init(30, 20, a);
  const Matrix w2 = glorot_init(30, 20, b);
  CHECK(w1 == w2);
  const double s = std::sqrt(6.0 / 50.0);
  CHECK(w1.cwiseAbs().maxCoeff() <= s);
  CHECK_THROWS_AS(glorot_init(0, 3, a), ConfigError);

  Rng c(1);
  const Matrix big = glorot_init(500, 200, c);  // 10^5 samples
  const double s_big = std::sqrt(6.0 / 700.0);
  const double mean = big.mean();
  const double var = (big.array() - mean).square().mean();
  CHECK(std::abs(var - s_big * s_big / 3.0) < 0.03 * s_big * s_big / 3.0);
}

TEST_CASE("adam step algebra", "[autodiff]") {
  SECTION("zero gradient and no decay leaves parameters unchanged") {
    std::vector<Matrix> params{row({1.5, -2.0})};
    std::vector<Matrix> grads{row({0.0, 0.0})};
    AdamState state;
    adam_step(params, grads, state, 0.1, 0.0);
    CHECK(params[0] == row({1.5, -2.0}));
    CHECK(state.t == 1);
  }
  SECTION("first step moves by about lr against the gradient sign") {
    std::vector<Matrix> params{row({0.3, 0.3})};
    std::vector<Matrix> grads{row({2.5, -1e-3})};
    AdamState state;
    adam_step(params, grads, state, 0.01, 0.0);
    CHECK(params[0](0, 0) == Approx(0.3 - 0.01).epsilon(1e-6));
    CHECK(params[0](0, 1) == Approx(0.3 + 0.01).epsilon(1e-4));
  }
  SECTION("coupled weight decay acts as a gradient") {
    std::vector<Matrix> params{row({1.0})};
    std::vector<Matrix> grads{row({0.0})};
    AdamState state;
    adam_step(params, grads, state, 0.01, 0.1);
    CHECK(params[0](0, 0) == Approx(0.99).epsilon(1e-6));
  }
  SECTION("state invariants") {
    Rng rng(2);
    std::vector<Matrix> params{oracle::random_matrix(3, 2, rng), oracle::random_matrix(1, 4, rng)};
    AdamState state;
    for (int k = 0; k < 5; ++k) {
      std::vector<Matrix> grads{oracle::random_matrix(3, 2, rng), oracle::random_matrix(1, 4, rng)};
      adam_step(params, grads, state, 0.01, 0.01);
    }
    CHECK(state.t == 5);
    REQUIRE(state.m.size() == 2);
    CHECK(state.v[0].rows() == 3);
    CHECK(state.v[1].cols() == 4);
    CHECK(state.v[0].minCoeff() >= 0.0);
    std::vector<Matrix> wrong{Matrix::Zero(2, 2), Matrix::Zero(1, 4)};
    CHECK_THROWS_AS(adam_step(params, wrong, state, 0.01, 0.0), ShapeError);
  }
}

TEST_CASE("gradient_check examples", "[autodiff]") {
  Rng rng(21);
  const Matrix w = oracle::random_matrix(4, 3, rng);
  CHECK(gradient_check([](Tape&, Var p) { return sum(p); }, w) < 1e-10);

  const Matrix x = oracle::random_matrix(5, 4, rng);
  auto relu_sq = [&](Tape& tape, Var p) { return sum(square(relu(matmul(tape.constant(x), p)))); };
  // Shift W until no pre-activation sits near the ReLU kink.
  Matrix w_smooth = w;
  for (int attempt = 0; attempt < 100; ++attempt) {
    if ((x * w_smooth).cwiseAbs().minCoeff() > 1e-2) break;
    w_smooth = oracle::random_matrix(4, 3, rng);
  }
  CHECK(gradient_check(relu_sq, w_smooth) < 1e-6);

  const std::vector<int> labels{0, 2, 1, 1, 0};
  auto ce = [&](Tape&, Var p) { return softmax_cross_entropy(p, labels, std::vector<bool>(5, true)); };
  CHECK(gradient_check(ce, oracle::random_matrix(5, 3, rng)) < 1e-6);

  CHECK_THROWS_AS(gradient_check([](Tape&, Var p) { return p; }, w), ValidationError);
}

TEST_CASE("every differentiable op passes the gradient check", "[autodiff]") {
  Rng rng(33);
  const Matrix other = oracle::random_matrix(3, 4, rng);
  const auto adj = renormalize(
      SparseAdjacency<double>::from_edges(4, std::vector<SparseAdjacency<double>::Edge>{{0, 1}, {1, 2}, {2, 3}}));
  const std::vector<int> labels{0, 1, 2, 1};

  for (int trial = 0; trial < 10; ++trial) {
    const Matrix at = off_kink(oracle::random_matrix(4, 3, rng));
    CHECK(gradient_check([&](Tape& t, Var p) { return sum(square(matmul(p, t.constant(other)))); }, at) < 1e-5);
    CHECK(gradient_check([&](Tape& t, Var p) { return sum(square(matmul(t.constant(other.transpose()), p))); },
                         oracle::random_matrix(3, 2, rng)) < 1e-5);
    CHECK(gradient_check([&](Tape&, Var p) { return sum(square(add(p, p))); }, at) < 1e-5);
    CHECK(gradient_check([&](Tape&, Var p) { return sum(square(scale(p, -1.7))); }, at) < 1e-5);
    CHECK(gradient_check([&](Tape&, Var p) { return sum(square(relu(p))); }, at) < 1e-5);
    CHECK(gradient_check([&](Tape&, Var p) { return sum(square(spmm(adj, p))); }, at) < 1e-5);
    CHECK(gradient_check([&](Tape&, Var p) { return softmax_cross_entropy(p, labels, {true, true, false, true}); },
                         at) < 1e-5);
    CHECK(gradient_check(
              [&](Tape&, Var p) {
                const std::vector<Var> params{p};
                return add(sum(square(p)), l1_penalty(params, 0.3));
              },
              at) < 1e-5);
    Rng fixed(7);
    CHECK(gradient_check(
              [&](Tape&, Var p) {
                Rng local = fixed;  // same mask on every evaluation
                return sum(square(dropout(p, 0.4, local, true)));
              },
              at) < 1e-5);
  }
}

TEST_CASE("backward visits each node once and frees intermediates", "[autodiff]") {
  Tape tape;
  Var x = tape.leaf(row({1, 2}));
  Var y = add(x, x);
  Var z = sum(square(y));
  tape.backward(z);
  // d/dx sum((2x)^2) = 8x.
  CHECK(x.grad() == row({8, 16}));
  CHECK_THROWS_AS(tape.backward(y), ValidationError);
}

TEST_CASE("tape replay is deterministic", "[autodiff]") {
  auto run = [] {
    Rng rng(123);
    Tape tape;
    Var w = tape.leaf(glorot_init(6, 4, rng));
    Var x = tape.constant(oracle::random_matrix(5, 6, rng));
    Var h = dropout(relu(matmul(x, w)), 0.3, rng, true);
    Var loss = softmax_cross_entropy(h, std::vector<int>{0, 1, 2, 3, 0}, std::vector<bool>(5, true));
    tape.backward(loss);
    return std::make_pair(loss.value()(0, 0), Matrix(w.grad()));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
