#pragma once

#include <cmath>
#include <string>

#include <nodenorm/autodiff.hpp>
#include <nodenorm/dense.hpp>
#include <nodenorm/errors.hpp>

namespace nodenorm {

/// Rows whose feature std falls below this are left untouched by NodeNorm and
/// have their std clamped to it by LayerNorm.
inline constexpr double kNormEps = 1e-6;

enum class LayerNormMode {
  kFull,  ///< α ⊙ (h - μ) / σ + β
  kStar,  ///< (h - μ) / σ
  kMS,    ///< h - μ
};

/// Population variance of every row (divisor d, not d - 1).
template <typename Derived>
DenseVector<typename Derived::Scalar> row_variance(const Eigen::MatrixBase<Derived>& h) {
  using Scalar = typename Derived::Scalar;
  const auto d = static_cast<Scalar>(h.cols());
  const DenseVector<Scalar> mean = h.rowwise().sum() / d;
  return (h.colwise() - mean).array().square().rowwise().sum().matrix() / d;
}

/// Divides row i by σ_i^{1/p}. Rows with σ_i < eps are returned unchanged.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> node_norm_rows(const Eigen::MatrixBase<Derived>& h, int p,
                                                     typename Derived::Scalar eps = kNormEps) {
  using Scalar = typename Derived::Scalar;
  if (p < 1) throw ConfigError("node_norm: p must be >= 1");
  if (h.cols() < 2) throw ConfigError("node_norm: needs at least 2 features per node");
  const DenseVector<Scalar> sigma = row_variance(h).cwiseSqrt();
  DenseMatrix<Scalar> out = h;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (sigma(i) < eps) continue;
    out.row(i) /= std::pow(sigma(i), Scalar(1) / static_cast<Scalar>(p));
  }
  return out;
}

/// Row-wise LayerNorm family. σ is clamped below by eps. `alpha` and `beta`
/// are 1×d and only read in kFull mode.
template <typename Derived, typename AlphaDerived, typename BetaDerived>
DenseMatrix<typename Derived::Scalar> layer_norm_rows(const Eigen::MatrixBase<Derived>& h,
                                                      const Eigen::MatrixBase<AlphaDerived>& alpha,
                                                      const Eigen::MatrixBase<BetaDerived>& beta,
                                                      LayerNormMode mode,
                                                      typename Derived::Scalar eps = kNormEps) {
  using Scalar = typename Derived::Scalar;
  const auto d = static_cast<Scalar>(h.cols());
  const DenseVector<Scalar> mean = h.rowwise().sum() / d;
  DenseMatrix<Scalar> out = h.colwise() - mean;
  if (mode == LayerNormMode::kMS) return out;
  const DenseVector<Scalar> sigma =
      (out.array().square().rowwise().sum() / d).sqrt().max(eps).matrix();
  out.array().colwise() /= sigma.array();
  if (mode == LayerNormMode::kFull) {
    if (alpha.size() != h.cols() || beta.size() != h.cols()) {
      throw ShapeError("layer_norm: alpha/beta must have one entry per feature");
    }
    out.array().rowwise() *= alpha.reshaped().transpose().array();
    out.array().rowwise() += beta.reshaped().transpose().array();
  }
  return out;
}

/// Differentiable NodeNorm_p.
Var node_norm(Var h, int p, double eps = kNormEps);

/// Differentiable LayerNorm family. `alpha`/`beta` are required (1×d) in
/// kFull mode and ignored otherwise.
Var layer_norm(Var h, Var alpha, Var beta, LayerNormMode mode, double eps = kNormEps);

}  // namespace nodenorm
