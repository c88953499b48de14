#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <nodenorm/dense.hpp>
#include <nodenorm/errors.hpp>
#include <nodenorm/model.hpp>
#include <nodenorm/normalization.hpp>
#include <nodenorm/rng.hpp>

namespace nodenorm {

/// Feature variance of every node (population divisor).
template <typename Derived>
DenseVector<typename Derived::Scalar> node_variance(const Eigen::MatrixBase<Derived>& h) {
  if (h.cols() < 1) throw ValidationError("node_variance: matrix has no feature columns");
  return row_variance(h);
}

/// Frobenius norm of the Pearson correlation matrix between feature columns.
/// Zero-variance columns correlate 0 with every other column and 1 with
/// themselves.
template <typename Derived>
typename Derived::Scalar correlation_frobenius(const Eigen::MatrixBase<Derived>& h) {
  using Scalar = typename Derived::Scalar;
  if (h.rows() < 2) throw ValidationError("correlation_frobenius: needs at least 2 nodes");
  const auto n = static_cast<Scalar>(h.rows());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> centered = h.rowwise() - h.colwise().mean();
  DenseVector<Scalar> norms = centered.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < centered.cols(); ++j) {
    // Columns constant up to rounding count as constant.
    const Scalar magnitude = h.col(j).cwiseAbs().maxCoeff() * std::sqrt(n);
    if (norms(j) <= Scalar(1e-12) * magnitude) {
      centered.col(j).setZero();
    } else {
      centered.col(j) /= norms(j);
    }
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> corr = centered.transpose() * centered;
  corr.diagonal().setOnes();
  return corr.norm();
}

/// Nodes split into five variance bins with per-bin accuracies.
struct BinReport {
  static constexpr int kBins = 5;
  /// Positions into the input arrays, ascending variance within each bin.
  std::vector<std::vector<std::size_t>> bins;
  std::vector<double> acc_shallow;
  std::vector<double> acc_deep;
  /// acc_shallow - acc_deep.
  std::vector<double> gap;
};

/// Sorts by (variance, position), cuts into 5 bins whose sizes differ by at
/// most one (earlier bins take the remainder) and compares accuracies.
BinReport variance_bins(std::span<const double> deep_variance, const std::vector<bool>& correct_deep,
                        const std::vector<bool>& correct_shallow);

struct VarianceProfile {
  /// var_i of every node for each recorded layer.
  std::vector<Vector> per_layer;
  /// 1-based layer numbers matching per_layer.
  std::vector<int> layer_indices;

  /// log10 of per_layer; zero variance maps to -inf.
  std::vector<Vector> log10() const;
};

/// Eval-mode node variances of every layer output (including the logits).
VarianceProfile variance_profile(const Model& model, const Matrix& x, const SparseAdjacency<double>& adj);

struct LipschitzEstimate {
  double value = 0.0;
  /// True when every pair was considered.
  bool exact = true;
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;
};

/// max ‖f_i − f_j‖ / ‖x_i − x_j‖ over node pairs, skipping pairs whose inputs
/// are closer than 1e-12. All pairs are used when `pair_limit` is unset or
/// at least the number of pairs; otherwise `pair_limit` pairs are drawn
/// uniformly (with replacement) from `rng`.
LipschitzEstimate graph_lipschitz(const Matrix& inputs, const Matrix& outputs, std::optional<std::size_t> pair_limit,
                                  Rng& rng);

/// Largest node count for which the model-level estimate is always exact.
inline constexpr Eigen::Index kExactLipschitzNodes = 2000;

/// Uses the eval-mode logits as f. Graphs up to kExactLipschitzNodes nodes
/// are always scored over all pairs; `pair_limit` applies above that.
LipschitzEstimate graph_lipschitz(const Model& model, const Matrix& x, const SparseAdjacency<double>& adj,
                                  std::optional<std::size_t> pair_limit, Rng& rng);

struct EpochMetrics {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct OverfitGaps {
  double acc_gap = 0.0;   ///< train − val accuracy at the final epoch
  double loss_gap = 0.0;  ///< train − val loss at the final epoch
};

OverfitGaps overfit_gaps(std::span<const EpochMetrics> history);

/// Same, from separate curves; the curves must be equally long and non-empty.
OverfitGaps overfit_gaps(std::span<const double> train_acc, std::span<const double> val_acc,
                         std::span<const double> train_loss, std::span<const double> val_loss);

}  // namespace nodenorm
