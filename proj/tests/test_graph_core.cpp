#include <catch2/catch_amalgamated.hpp>

#include <nodenorm/sparse_adjacency.hpp>

#include "support/oracles.hpp"

using namespace nodenorm;
using Catch::Approx;
using Edge = SparseAdjacency<double>::Edge;

namespace {

SparseAdjacency<double> graph(std::int64_t n, std::vector<Edge> edges) {
  return SparseAdjacency<double>::from_edges(n, edges);
}

}  // namespace

TEST_CASE("renormalize: isolated node keeps only its self-loop", "[graph-core]") {
  const auto hat = renormalize(graph(1, {}));
  REQUIRE(hat.nnz() == 1);
  CHECK(hat.coeff(0, 0) == 1.0);
}

TEST_CASE("renormalize: single edge gives the all-halves operator", "[graph-core]") {
  const Matrix dense = renormalize(graph(2, {{0, 1}})).to_dense();
  CHECK(dense.isApprox(Matrix::Constant(2, 2, 0.5), 1e-15));
}

TEST_CASE("renormalize: three-node path", "[graph-core]") {
  const auto hat = renormalize(graph(3, {{0, 1}, {1, 2}}));
  CHECK(hat.coeff(0, 0) == Approx(0.5).margin(1e-15));
  CHECK(hat.coeff(0, 1) == Approx(1.0 / std::sqrt(6.0)).margin(1e-15));
  CHECK(hat.coeff(1, 1) == Approx(1.0 / 3.0).margin(1e-15));
  CHECK(hat.coeff(1, 2) == Approx(1.0 / std::sqrt(6.0)).margin(1e-15));
  CHECK(hat.coeff(2, 2) == Approx(0.5).margin(1e-15));
  CHECK_FALSE(hat.contains(0, 2));
}

TEST_CASE("renormalize matches the dense oracle and keeps the pattern", "[graph-core]") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(32));
    const auto edges = oracle::random_edges(n, rng.uniform(0.0, 0.5), rng);
    const auto hat = renormalize(graph(n, edges));
    const Matrix expected = oracle::dense_renormalized(oracle::dense_adjacency(n, edges));
    const Matrix got = hat.to_dense();
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(hat.nnz() == static_cast<std::int64_t>(2 * edges.size()) + n);
    for (std::int64_t i = 0; i < n; ++i) {
      CHECK(hat.contains(i, i));
      for (auto k = hat.row_begin(i); k < hat.row_end(i); ++k) {
        CHECK(hat.values()[k] > 0.0);
        CHECK(hat.values()[k] <= 1.0);
      }
    }
  }
}

TEST_CASE("renormalize rejects asymmetric and non-binary input", "[graph-core]") {
  const SparseAdjacency<double> directed(2, {0, 1, 1}, {1}, {1.0});
  CHECK_THROWS_AS(renormalize(directed), StructuralError);
  const SparseAdjacency<double> weighted(2, {0, 1, 2}, {1, 0}, {2.0, 2.0});
  CHECK_THROWS_AS(renormalize(weighted), ValidationError);
  const SparseAdjacency<double> negative(2, {0, 1, 2}, {1, 0}, {-1.0, -1.0});
  CHECK_THROWS_AS(renormalize(negative), ValidationError);
}

TEST_CASE("from_edges deduplicates self-loops and repeated edges", "[graph-core]") {
  std::size_t dropped = 0;
  const std::vector<Edge> edges{{0, 1}, {1, 0}, {1, 1}, {0, 1}, {1, 2}};
  const auto adj = SparseAdjacency<double>::from_edges(3, edges, &dropped);
  CHECK(adj.nnz() == 4);
  CHECK(dropped == 3);
  CHECK(adj.is_structurally_symmetric());
  CHECK_THROWS_AS(SparseAdjacency<double>::from_edges(2, std::vector<Edge>{{0, 2}}), StructuralError);
}

TEST_CASE("CSR constructor validates its arrays", "[graph-core]") {
  CHECK_THROWS(SparseAdjacency<double>(2, {0, 2, 1}, {0, 1}, {1.0, 1.0}));
  CHECK_THROWS(SparseAdjacency<double>(2, {0, 2, 2}, {1, 0}, {1.0, 1.0}));
  CHECK_THROWS(SparseAdjacency<double>(2, {0, 2, 2}, {1, 1}, {1.0, 1.0}));
  CHECK_THROWS(SparseAdjacency<double>(2, {0, 1, 2}, {0, 5}, {1.0, 1.0}));
  CHECK_THROWS(SparseAdjacency<double>(2, {0, 1, 2}, {0, 1}, {1.0}));
}

TEST_CASE("spmm examples", "[graph-core]") {
  Matrix h(2, 2);
  h << 2, 0, 0, 2;
  const auto hat = renormalize(graph(2, {{0, 1}}));
  CHECK(spmm(hat, h).isApprox(Matrix::Ones(2, 2), 1e-15));

  Rng rng(3);
  const Matrix r = oracle::random_matrix(5, 3, rng);
  CHECK(spmm(SparseAdjacency<double>::identity(5), r) == r);
  CHECK(spmm(hat, Matrix::Zero(2, 4)).isZero(0.0));
  CHECK_THROWS_AS(spmm(hat, Matrix::Zero(3, 2)), ShapeError);
}

TEST_CASE("spmm equals the brute-force dense product on random graphs", "[graph-core]") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(32));
    const auto edges = oracle::random_edges(n, rng.uniform(0.0, 0.6), rng);
    const auto hat = renormalize(graph(n, edges));
    const Matrix h = oracle::random_matrix(n, 1 + static_cast<Eigen::Index>(rng.below(6)), rng);
    const Matrix expected = oracle::dense_product(oracle::dense_renormalized(oracle::dense_adjacency(n, edges)), h);
    REQUIRE((spmm(hat, h) - expected).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((spmm_transposed(hat, h) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("power_propagate examples and composition law", "[graph-core]") {
  Matrix h(2, 2);
  h << 2, 0, 0, 2;
  const auto hat = renormalize(graph(2, {{0, 1}}));
  CHECK(power_propagate(hat, h, 0) == h);
  CHECK(power_propagate(hat, h, 1) == spmm(hat, h));
  CHECK(power_propagate(hat, h, 2).isApprox(Matrix::Ones(2, 2), 1e-15));
  CHECK_THROWS_AS(power_propagate(hat, h, -1), ConfigError);

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.below(30));
    const auto adj = renormalize(graph(n, oracle::random_edges(n, 0.3, rng)));
    const Matrix x = oracle::random_matrix(n, 3, rng);
    const int k1 = static_cast<int>(rng.below(5));
    const int k2 = static_cast<int>(rng.below(5));
    const Matrix direct = power_propagate(adj, x, k1 + k2);
    const Matrix composed = power_propagate(adj, power_propagate(adj, x, k1), k2);
    REQUIRE((direct - composed).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("renormalized operator maps constants to constants on regular graphs", "[graph-core]") {
  // Cycle: every node has degree 2, so each row of Â sums to 3 * (1/3) = 1.
  for (std::int64_t n : {3, 7, 20}) {
    std::vector<Edge> edges;
    for (std::int64_t i = 0; i < n; ++i) edges.emplace_back(std::min(i, (i + 1) % n), std::max(i, (i + 1) % n));
    const Matrix out = spmm(renormalize(graph(n, edges)), Matrix::Ones(n, 1));
    CHECK((out.array() - out(0, 0)).abs().maxCoeff() < 1e-12);
    CHECK(out(0, 0) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("renormalize counts an existing diagonal entry as the self-loop", "[graph-core]") {
  const SparseAdjacency<double> with_loop(2, {0, 2, 3}, {0, 1, 0}, {1.0, 1.0, 1.0});
  const auto hat = renormalize(with_loop);
  const auto clean = renormalize(graph(2, {{0, 1}}));
  CHECK(hat.to_dense().isApprox(clean.to_dense(), 1e-15));
}
