#pragma once

// Brute-force reference implementations used as independent oracles by the
// unit tests and the acceptance binary. They deliberately avoid the library's
// own kernels: plain loops over dense storage, two-pass statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include <nodenorm/dense.hpp>
#include <nodenorm/rng.hpp>
#include <nodenorm/sparse_adjacency.hpp>

namespace oracle {

using nodenorm::Matrix;
using nodenorm::Rng;
using Edge = nodenorm::SparseAdjacency<double>::Edge;

/// Erdős–Rényi edge list (u < v) on n nodes.
inline std::vector<Edge> random_edges(std::int64_t n, double p, Rng& rng) {
  std::vector<Edge> edges;
  for (std::int64_t u = 0; u < n; ++u) {
    for (std::int64_t v = u + 1; v < n; ++v) {
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
    }
  }
  return edges;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline Matrix dense_adjacency(std::int64_t n, const std::vector<Edge>& edges) {
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

/// D̃^{-1/2} (A + I) D̃^{-1/2} computed entry by entry.
inline Matrix dense_renormalized(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix tilde = a;
  for (Eigen::Index i = 0; i < n; ++i) tilde(i, i) = 1.0;
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) degree[i] += tilde(i, j);
  }
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = tilde(i, j) / std::sqrt(degree[i] * degree[j]);
  }
  return out;
}

inline Matrix dense_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
    }
  }
  return out;
}

/// Two-pass population variance of every row.
inline std::vector<double> node_variance(const Matrix& h) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < h.cols(); ++j) mean += h(i, j);
    mean /= static_cast<double>(h.cols());
    double ss = 0.0;
    for (Eigen::Index j = 0; j < h.cols(); ++j) ss += (h(i, j) - mean) * (h(i, j) - mean);
    out.push_back(ss / static_cast<double>(h.cols()));
  }
  return out;
}

inline double row_std(const Matrix& h, Eigen::Index i) {
  double mean = 0.0;
  for (Eigen::Index j = 0; j < h.cols(); ++j) mean += h(i, j);
  mean /= static_cast<double>(h.cols());
  double ss = 0.0;
  for (Eigen::Index j = 0; j < h.cols(); ++j) ss += (h(i, j) - mean) * (h(i, j) - mean);
  return std::sqrt(ss / static_cast<double>(h.cols()));
}

inline double row_mean(const Matrix& h, Eigen::Index i) {
  double mean = 0.0;
  for (Eigen::Index j = 0; j < h.cols(); ++j) mean += h(i, j);
  return mean / static_cast<double>(h.cols());
}

/// Pearson correlation Frobenius norm with the constant-column convention
/// (0 off-diagonal, 1 on the diagonal).
inline double correlation_frobenius(const Matrix& h) {
  const Eigen::Index n = h.rows();
  const Eigen::Index d = h.cols();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) mean[j] += h(i, j);
    mean[j] /= static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) sd[j] += (h(i, j) - mean[j]) * (h(i, j) - mean[j]);
    sd[j] = std::sqrt(sd[j]);
  }
  double total = 0.0;
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      double c = 0.0;
      if (a == b) {
        c = 1.0;
      } else if (sd[a] > 1e-12 && sd[b] > 1e-12) {
        for (Eigen::Index i = 0; i < n; ++i) c += (h(i, a) - mean[a]) * (h(i, b) - mean[b]);
        c /= sd[a] * sd[b];
      }
      total += c * c;
    }
  }
  return std::sqrt(total);
}

/// max ‖f_i − f_j‖ / ‖x_i − x_j‖ over all pairs with distinct inputs.
inline double lipschitz(const Matrix& x, const Matrix& f) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      double dx = 0.0, df = 0.0;
      for (Eigen::Index k = 0; k < x.cols(); ++k) dx += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
      for (Eigen::Index k = 0; k < f.cols(); ++k) df += (f(i, k) - f(j, k)) * (f(i, k) - f(j, k));
      if (std::sqrt(dx) < 1e-12) continue;
      best = std::max(best, std::sqrt(df) / std::sqrt(dx));
    }
  }
  return best;
}

struct Bins {
  std::vector<std::vector<std::size_t>> members;
  std::vector<double> gap;
};

/// Selection-sort ranking by (variance, index) and bins filled one node at a
/// time: bin b receives floor(n/5) nodes, plus one when b < n mod 5.
inline Bins variance_bins(const std::vector<double>& var, const std::vector<bool>& deep,
                          const std::vector<bool>& shallow) {
  const std::size_t n = var.size();
  std::vector<std::size_t> order;
  std::vector<bool> taken(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (pick == n || var[i] < var[pick]) pick = i;
    }
    taken[pick] = true;
    order.push_back(pick);
  }
  Bins bins;
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < 5; ++b) {
    const std::size_t size = n / 5 + (b < n % 5 ? 1 : 0);
    std::vector<std::size_t> members(order.begin() + cursor, order.begin() + cursor + size);
    cursor += size;
    double s = 0.0, d = 0.0;
    for (auto i : members) {
      s += shallow[i] ? 1.0 : 0.0;
      d += deep[i] ? 1.0 : 0.0;
    }
    bins.gap.push_back(s / static_cast<double>(size) - d / static_cast<double>(size));
    bins.members.push_back(std::move(members));
  }
  return bins;
}

}  // namespace oracle
