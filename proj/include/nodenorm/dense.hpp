#pragma once

#include <Eigen/Dense>

namespace nodenorm {

// Rows are nodes, so row-major storage keeps per-node work contiguous.
template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = DenseMatrix<double>;
using Vector = DenseVector<double>;

}  // namespace nodenorm
