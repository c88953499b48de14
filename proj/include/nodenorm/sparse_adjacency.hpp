#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nodenorm/dense.hpp>
#include <nodenorm/errors.hpp>

namespace nodenorm {

/// Compressed-row sparse matrix over n nodes.
///
/// Holds either the raw binary adjacency A or the renormalized propagation
/// operator. Immutable after construction; the constructor checks that the
/// offsets are monotone, columns are in range, sorted and unique per row.
/// Symmetry is not enforced here (renormalize rejects asymmetric input).
template <typename Scalar = double>
class SparseAdjacency {
 public:
  using Index = std::int64_t;
  using Edge = std::pair<Index, Index>;

  SparseAdjacency() : row_offsets_(1, 0) {}

  SparseAdjacency(Index n, std::vector<Index> row_offsets, std::vector<Index> col_indices,
                  std::vector<Scalar> values)
      : n_(n),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  /// Binary symmetric adjacency from an undirected edge list.
  /// Self-loops and repeated edges are dropped; `dropped` receives their count.
  static SparseAdjacency from_edges(Index n, std::span<const Edge> edges,
                                    std::size_t* dropped = nullptr) {
    if (n < 0) throw StructuralError("node count must be non-negative");
    std::vector<Edge> directed;
    directed.reserve(2 * edges.size());
    std::size_t self_loops = 0;
    for (const auto& [u, v] : edges) {
      if (u < 0 || v < 0 || u >= n || v >= n) {
        throw StructuralError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") out of range for n=" + std::to_string(n));
      }
      if (u == v) {
        ++self_loops;
        continue;
      }
      directed.emplace_back(u, v);
      directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    const auto before = directed.size();
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
    if (dropped != nullptr) *dropped = self_loops + (before - directed.size()) / 2;

    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<Index> cols;
    cols.reserve(directed.size());
    for (const auto& [u, v] : directed) {
      ++offsets[static_cast<std::size_t>(u) + 1];
      cols.push_back(v);
    }
    for (Index i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    std::vector<Scalar> vals(cols.size(), Scalar(1));
    return SparseAdjacency(n, std::move(offsets), std::move(cols), std::move(vals));
  }

  static SparseAdjacency identity(Index n) {
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
    std::vector<Index> cols(static_cast<std::size_t>(n));
    for (Index i = 0; i <= n; ++i) offsets[i] = i;
    for (Index i = 0; i < n; ++i) cols[i] = i;
    return SparseAdjacency(n, std::move(offsets), std::move(cols),
                           std::vector<Scalar>(static_cast<std::size_t>(n), Scalar(1)));
  }

  Index n() const { return n_; }
  Index nnz() const { return static_cast<Index>(col_indices_.size()); }
  std::span<const Index> row_offsets() const { return row_offsets_; }
  std::span<const Index> col_indices() const { return col_indices_; }
  std::span<const Scalar> values() const { return values_; }

  Index row_begin(Index i) const { return row_offsets_[i]; }
  Index row_end(Index i) const { return row_offsets_[i + 1]; }

  /// Stored value at (i, j), or zero when the entry is absent.
  Scalar coeff(Index i, Index j) const {
    const auto first = col_indices_.begin() + row_offsets_[i];
    const auto last = col_indices_.begin() + row_offsets_[i + 1];
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return Scalar(0);
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
  }

  bool contains(Index i, Index j) const {
    const auto first = col_indices_.begin() + row_offsets_[i];
    const auto last = col_indices_.begin() + row_offsets_[i + 1];
    return std::binary_search(first, last, j);
  }

  bool is_structurally_symmetric() const {
    for (Index i = 0; i < n_; ++i) {
      for (Index k = row_begin(i); k < row_end(i); ++k) {
        if (!contains(col_indices_[k], i)) return false;
      }
    }
    return true;
  }

  DenseMatrix<Scalar> to_dense() const {
    DenseMatrix<Scalar> dense = DenseMatrix<Scalar>::Zero(n_, n_);
    for (Index i = 0; i < n_; ++i) {
      for (Index k = row_begin(i); k < row_end(i); ++k) dense(i, col_indices_[k]) = values_[k];
    }
    return dense;
  }

 private:
  void validate() const {
    if (n_ < 0) throw StructuralError("node count must be non-negative");
    if (row_offsets_.size() != static_cast<std::size_t>(n_) + 1) {
      throw StructuralError("row_offsets must have n+1 entries");
    }
    if (row_offsets_.front() != 0) throw StructuralError("row_offsets must start at 0");
    if (values_.size() != col_indices_.size()) {
      throw StructuralError("values and col_indices differ in length");
    }
    if (row_offsets_.back() != static_cast<Index>(col_indices_.size())) {
      throw StructuralError("row_offsets[n] must equal the number of stored entries");
    }
    for (Index i = 0; i < n_; ++i) {
      if (row_offsets_[i + 1] < row_offsets_[i]) {
        throw StructuralError("row_offsets decrease at row " + std::to_string(i));
      }
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const Index j = col_indices_[k];
        if (j < 0 || j >= n_) {
          throw StructuralError("column index out of range in row " + std::to_string(i));
        }
        if (k > row_offsets_[i] && col_indices_[k - 1] >= j) {
          throw StructuralError("columns unsorted or duplicated in row " + std::to_string(i));
        }
      }
    }
  }

  Index n_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<Scalar> values_;
};

/// Renormalized propagation operator D̃^{-1/2} (A + I) D̃^{-1/2}.
///
/// Input must be symmetric and binary. A diagonal entry that is already
/// present counts as the self-loop instead of being doubled.
template <typename Scalar>
SparseAdjacency<Scalar> renormalize(const SparseAdjacency<Scalar>& adj) {
  using Index = typename SparseAdjacency<Scalar>::Index;
  const Index n = adj.n();
  const auto cols = adj.col_indices();
  const auto vals = adj.values();
  for (Index k = 0; k < adj.nnz(); ++k) {
    if (vals[k] != Scalar(1)) {
      throw ValidationError("adjacency must be binary; found value " +
                            std::to_string(static_cast<double>(vals[k])));
    }
  }
  if (!adj.is_structurally_symmetric()) throw StructuralError("adjacency is not symmetric");

  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> out_cols;
  out_cols.reserve(static_cast<std::size_t>(adj.nnz() + n));
  std::vector<Scalar> degree(static_cast<std::size_t>(n), Scalar(0));
  for (Index i = 0; i < n; ++i) {
    bool diagonal_done = false;
    for (Index k = adj.row_begin(i); k < adj.row_end(i); ++k) {
      const Index j = cols[k];
      if (!diagonal_done && j >= i) {
        out_cols.push_back(i);
        diagonal_done = true;
        if (j == i) continue;
      }
      out_cols.push_back(j);
    }
    if (!diagonal_done) out_cols.push_back(i);
    offsets[i + 1] = static_cast<Index>(out_cols.size());
    degree[i] = static_cast<Scalar>(offsets[i + 1] - offsets[i]);
  }

  std::vector<Scalar> out_vals(out_cols.size());
  for (Index i = 0; i < n; ++i) {
    for (Index k = offsets[i]; k < offsets[i + 1]; ++k) {
      out_vals[k] = Scalar(1) / std::sqrt(degree[i] * degree[out_cols[k]]);
    }
  }
  return SparseAdjacency<Scalar>(n, std::move(offsets), std::move(out_cols), std::move(out_vals));
}

/// adj · H.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> spmm(const SparseAdjacency<Scalar>& adj, const Eigen::MatrixBase<Derived>& h) {
  if (h.rows() != adj.n()) {
    throw ShapeError("spmm: adjacency has " + std::to_string(adj.n()) + " rows, dense operand has " +
                     std::to_string(h.rows()));
  }
  const auto cols = adj.col_indices();
  const auto vals = adj.values();
  DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < adj.n(); ++i) {
    for (auto k = adj.row_begin(i); k < adj.row_end(i); ++k) {
      out.row(i).noalias() += vals[k] * h.row(cols[k]);
    }
  }
  return out;
}

/// adjᵀ · G, the adjoint of spmm.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> spmm_transposed(const SparseAdjacency<Scalar>& adj,
                                    const Eigen::MatrixBase<Derived>& g) {
  if (g.rows() != adj.n()) throw ShapeError("spmm_transposed: row count mismatch");
  const auto cols = adj.col_indices();
  const auto vals = adj.values();
  DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < adj.n(); ++i) {
    for (auto k = adj.row_begin(i); k < adj.row_end(i); ++k) {
      out.row(cols[k]).noalias() += vals[k] * g.row(i);
    }
  }
  return out;
}

/// adj^k · H; k = 0 returns H.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> power_propagate(const SparseAdjacency<Scalar>& adj,
                                    const Eigen::MatrixBase<Derived>& h, int k) {
  if (k < 0) throw ConfigError("power_propagate: k must be non-negative");
  if (h.rows() != adj.n()) throw ShapeError("power_propagate: row count mismatch");
  DenseMatrix<Scalar> out = h;
  for (int step = 0; step < k; ++step) out = spmm(adj, out);
  return out;
}

}  // namespace nodenorm
