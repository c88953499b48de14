#include <catch2/catch_amalgamated.hpp>

#include <set>

#include <nodenorm/diagnostics.hpp>

#include "support/oracles.hpp"

using namespace nodenorm;
using Catch::Approx;
using Edge = SparseAdjacency<double>::Edge;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : values) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("node_variance examples", "[diagnostics]") {
  const Vector v = node_variance(rows({{4, 4, 4}, {1, 2, 3}}));
  CHECK(v(0) == 0.0);
  CHECK(v(1) == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(node_variance(rows({{0, 2}}))(0) == 1.0);
  CHECK_THROWS_AS(node_variance(Matrix(3, 0)), ValidationError);
}

TEST_CASE("node_variance matches the two-pass oracle", "[diagnostics]") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix h = oracle::random_matrix(1 + rng.below(50), 1 + rng.below(20), rng, rng.uniform(0.1, 100.0));
    const Vector got = node_variance(h);
    const auto expected = oracle::node_variance(h);
    for (Eigen::Index i = 0; i < got.size(); ++i) {
      REQUIRE(got(i) >= 0.0);
      REQUIRE(std::abs(got(i) - expected[i]) <= 1e-12 * std::max(1.0, expected[i]));
    }
  }
}

TEST_CASE("variance_bins examples", "[diagnostics]") {
  const std::vector<double> var{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const std::vector<bool> all(10, true);
  const BinReport same = variance_bins(var, all, all);
  for (double g : same.gap) CHECK(g == 0.0);

  std::vector<bool> deep(10, false);
  for (int i = 0; i < 5; ++i) deep[i] = true;
  const BinReport report = variance_bins(var, deep, all);
  const auto expected = oracle::variance_bins(var, deep, all);
  REQUIRE(report.gap.size() == 5);
  for (int b = 0; b < 5; ++b) CHECK(report.gap[b] == expected.gap[b]);
  // Two nodes per bin: bins 1-2 fully correct, bin 3 splits 1/1.
  CHECK(report.gap == std::vector<double>{0.0, 0.0, 0.5, 1.0, 1.0});

  CHECK_THROWS_AS(variance_bins(std::vector<double>{1, 2, 3, 4}, {true, true, true, true}, {true, true, true, true}),
                  ValidationError);
  CHECK_THROWS_AS(variance_bins(var, std::vector<bool>(9, true), all), ValidationError);
}

TEST_CASE("variance_bins breaks ties by node position", "[diagnostics]") {
  const std::vector<double> var(7, 1.0);
  const BinReport report = variance_bins(var, std::vector<bool>(7, true), std::vector<bool>(7, true));
  const std::vector<std::vector<std::size_t>> expected{{0, 1}, {2, 3}, {4}, {5}, {6}};
  CHECK(report.bins == expected);
}

TEST_CASE("variance_bins matches the brute-force oracle and partitions", "[diagnostics]") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.below(46);
    std::vector<double> var(n);
    std::vector<bool> deep(n), shallow(n);
    for (std::size_t i = 0; i < n; ++i) {
      var[i] = static_cast<double>(rng.below(8));  // many ties
      deep[i] = rng.bernoulli(0.5);
      shallow[i] = rng.bernoulli(0.7);
    }
    const BinReport got = variance_bins(var, deep, shallow);
    const auto expected = oracle::variance_bins(var, deep, shallow);
    REQUIRE(got.bins == expected.members);
    REQUIRE(got.gap == expected.gap);
    std::set<std::size_t> seen;
    std::size_t smallest = n, largest = 0;
    for (const auto& bin : got.bins) {
      smallest = std::min(smallest, bin.size());
      largest = std::max(largest, bin.size());
      for (auto i : bin) REQUIRE(seen.insert(i).second);
    }
    REQUIRE(seen.size() == n);
    REQUIRE(largest - smallest <= 1);
    for (std::size_t b = 0; b < 5; ++b) REQUIRE(got.gap[b] == got.acc_shallow[b] - got.acc_deep[b]);
  }
}

TEST_CASE("graph_lipschitz examples", "[diagnostics]") {
  Rng rng(3);
  CHECK(graph_lipschitz(rows({{0}, {1}}), rows({{0}, {3}}), std::nullopt, rng).value == 3.0);
  CHECK(graph_lipschitz(rows({{0, 1}, {2, 3}, {5, 1}}), rows({{7}, {7}, {7}}), std::nullopt, rng).value == 0.0);

  // Nodes 0 and 2 share inputs; only pairs (0,1) and (1,2) count.
  const auto est = graph_lipschitz(rows({{0}, {1}, {0}}), rows({{0}, {2}, {100}}), std::nullopt, rng);
  CHECK(est.value == 98.0);
  CHECK(est.pairs_skipped == 1);
  CHECK(est.pairs_used == 2);
  CHECK(est.exact);

  CHECK_THROWS_AS(graph_lipschitz(rows({{1}, {1}}), rows({{0}, {1}}), std::nullopt, rng), ValidationError);
}

TEST_CASE("graph_lipschitz matches the all-pairs oracle; samples never exceed it", "[diagnostics]") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(49));
    const Matrix x = oracle::random_matrix(n, 3, rng);
    const Matrix f = oracle::random_matrix(n, 2, rng);
    const double exact = graph_lipschitz(x, f, std::nullopt, rng).value;
    REQUIRE(exact == Approx(oracle::lipschitz(x, f)).epsilon(1e-12));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 50 + static_cast<Eigen::Index>(rng.below(151));
    const Matrix x = oracle::random_matrix(n, 4, rng);
    const Matrix f = oracle::random_matrix(n, 3, rng);
    const double all = graph_lipschitz(x, f, std::nullopt, rng).value;
    const auto sampled = graph_lipschitz(x, f, 100, rng);
    REQUIRE_FALSE(sampled.exact);
    REQUIRE(sampled.value <= all);
  }
}

TEST_CASE("model-level graph_lipschitz is exact on small graphs", "[diagnostics]") {
  Rng rng(5);
  const auto adj = renormalize(SparseAdjacency<double>::from_edges(30, oracle::random_edges(30, 0.2, rng)));
  ModelSpec spec;
  spec.depth = 3;
  spec.input_dim = 4;
  spec.hidden_dim = 5;
  spec.num_classes = 3;
  const Model model = build_model(spec, rng);
  const Matrix x = oracle::random_matrix(30, 4, rng);
  const auto est = graph_lipschitz(model, x, adj, 10, rng);
  CHECK(est.exact);
  CHECK(est.value == Approx(oracle::lipschitz(x, evaluate(model, x, adj).logits)).epsilon(1e-12));
}

TEST_CASE("correlation_frobenius examples", "[diagnostics]") {
  CHECK(correlation_frobenius(rows({{1, 1}, {2, 2}, {5, 5}})) == Approx(2.0).epsilon(1e-14));
  CHECK(correlation_frobenius(rows({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}})) == Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(correlation_frobenius(rows({{1}, {4}, {2}})) == 1.0);
  CHECK(correlation_frobenius(rows({{3, 1}, {3, 2}, {3, 7}})) == Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(correlation_frobenius(rows({{1, 2}})), ValidationError);
}

TEST_CASE("correlation_frobenius matches the oracle and is affine invariant", "[diagnostics]") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(49));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(8));
    Matrix h = oracle::random_matrix(n, d, rng);
    if (d > 2 && rng.bernoulli(0.3)) h.col(1).setConstant(2.5);
    const double got = correlation_frobenius(h);
    REQUIRE(got == Approx(oracle::correlation_frobenius(h)).epsilon(1e-12));
    Matrix mapped = h;
    for (Eigen::Index j = 0; j < d; ++j) {
      mapped.col(j) = mapped.col(j).array() * rng.uniform(0.1, 10.0) + rng.uniform(-5.0, 5.0);
    }
    REQUIRE(std::abs(correlation_frobenius(mapped) - got) < 1e-9);
  }
}

TEST_CASE("overfit_gaps", "[diagnostics]") {
  std::vector<EpochMetrics> same{{0.5, 0.7, 0.5, 0.7}, {0.3, 0.9, 0.3, 0.9}};
  const auto zero = overfit_gaps(same);
  CHECK(zero.acc_gap == 0.0);
  CHECK(zero.loss_gap == 0.0);

  std::vector<EpochMetrics> history{{1.0, 0.5, 1.2, 0.4}, {0.01, 0.99, 1.01, 0.80}};
  const auto gaps = overfit_gaps(history);
  CHECK(gaps.acc_gap == Approx(0.19).epsilon(1e-12));
  CHECK(gaps.loss_gap == Approx(-1.0).epsilon(1e-12));

  CHECK_THROWS_AS(overfit_gaps(std::span<const EpochMetrics>{}), ValidationError);
  const std::vector<double> a{1, 2}, b{1};
  CHECK_THROWS_AS(overfit_gaps(a, b, a, a), ValidationError);
}

TEST_CASE("variance_profile contract", "[diagnostics]") {
  Rng rng(7);
  const auto adj = renormalize(SparseAdjacency<double>::from_edges(40, oracle::random_edges(40, 0.15, rng)));
  const Matrix x = oracle::random_matrix(40, 6, rng);
  ModelSpec spec;
  spec.depth = 2;
  spec.input_dim = 6;
  spec.hidden_dim = 8;
  spec.num_classes = 3;
  const auto two = variance_profile(build_model(spec, rng), x, adj);
  CHECK(two.per_layer.size() == 2);
  CHECK(two.layer_indices == std::vector<int>{1, 2});

  Model zero = build_model(spec, rng);
  for (auto& w : zero.weights) w.setZero();
  for (const auto& v : variance_profile(zero, x, adj).per_layer) CHECK(v.isZero(0.0));

  spec.depth = 6;
  spec.norm = NormKind::node_norm(1);
  const auto normed = variance_profile(build_model(spec, rng), x, adj);
  const auto logs = normed.log10();
  for (std::size_t l = 0; l + 1 < normed.per_layer.size(); ++l) {
    for (Eigen::Index i = 0; i < normed.per_layer[l].size(); ++i) {
      const double v = normed.per_layer[l](i);
      if (v < kNormEps * kNormEps) continue;  // degenerate rows pass through
      REQUIRE(std::abs(v - 1.0) < 1e-9);
      REQUIRE(std::abs(logs[l](i)) < 1e-9);
    }
  }
}
