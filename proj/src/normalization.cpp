#include <nodenorm/normalization.hpp>

#include <memory>
#include <vector>

namespace nodenorm {

Var node_norm(Var h, int p, double eps) {
  Matrix out = node_norm_rows(h.value(), p, eps);
  const auto ih = h.id();
  return h.tape().record(std::move(out), {h}, [ih, p, eps](const Matrix& g, Tape& t) {
    // y = x σ^{-1/p}:  dx = σ^{-1/p} (g - (1/p) (g·x) (x - μ) / (d σ²))
    const Matrix& x = t.value(ih);
    const double d = static_cast<double>(x.cols());
    const double inv_p = 1.0 / static_cast<double>(p);
    Matrix dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double mu = x.row(i).mean();
      const auto centered = (x.row(i).array() - mu).eval();
      const double var = centered.square().sum() / d;
      const double sigma = std::sqrt(var);
      if (sigma < eps) {
        dx.row(i) = g.row(i);
        continue;
      }
      const double s = std::pow(sigma, -inv_p);
      const double gx = g.row(i).dot(x.row(i));
      dx.row(i) = (s * (g.row(i).array() - inv_p * gx * centered / (d * var))).matrix();
    }
    t.accumulate(ih, dx);
  });
}

Var layer_norm(Var h, Var alpha, Var beta, LayerNormMode mode, double eps) {
  const Matrix& x = h.value();
  const double d = static_cast<double>(x.cols());
  if (mode == LayerNormMode::kFull) {
    if (!alpha.valid() || !beta.valid()) throw ValidationError("layer_norm: full mode needs alpha and beta");
    if (alpha.rows() != 1 || beta.rows() != 1 || alpha.cols() != x.cols() || beta.cols() != x.cols()) {
      throw ShapeError("layer_norm: alpha/beta must be 1x" + std::to_string(x.cols()));
    }
  }

  if (mode == LayerNormMode::kMS) {
    Matrix out = layer_norm_rows(x, Matrix(), Matrix(), mode, eps);
    const auto ih = h.id();
    return h.tape().record(std::move(out), {h}, [ih](const Matrix& g, Tape& t) {
      t.accumulate(ih, g.colwise() - g.rowwise().mean());
    });
  }

  struct Cache {
    Matrix z;
    Vector sigma;
    std::vector<bool> clamped;
  };
  auto cache = std::make_shared<Cache>();
  const Vector mean = x.rowwise().mean();
  cache->z = x.colwise() - mean;
  const Vector raw_sigma = (cache->z.array().square().rowwise().sum() / d).sqrt().matrix();
  cache->sigma = raw_sigma.array().max(eps).matrix();
  cache->clamped.resize(static_cast<std::size_t>(x.rows()));
  // Rows whose std was clamped see σ as a constant.
  for (Eigen::Index i = 0; i < x.rows(); ++i) cache->clamped[i] = raw_sigma(i) < eps;
  cache->z.array().colwise() /= cache->sigma.array();

  auto normalized_grad = [cache](const Matrix& gz) {
    // dx = (gz - mean(gz) - z · mean(gz ⊙ z)) / σ
    const Matrix& z = cache->z;
    Matrix dx(gz.rows(), gz.cols());
    for (Eigen::Index i = 0; i < gz.rows(); ++i) {
      const double g_mean = gz.row(i).mean();
      const double gz_mean = cache->clamped[i] ? 0.0 : gz.row(i).cwiseProduct(z.row(i)).mean();
      dx.row(i) = (gz.row(i).array() - g_mean - z.row(i).array() * gz_mean) / cache->sigma(i);
    }
    return dx;
  };

  const auto ih = h.id();
  if (mode == LayerNormMode::kStar) {
    return h.tape().record(cache->z, {h}, [ih, normalized_grad](const Matrix& g, Tape& t) {
      t.accumulate(ih, normalized_grad(g));
    });
  }

  Matrix out = cache->z;
  out.array().rowwise() *= alpha.value().row(0).array();
  out.array().rowwise() += beta.value().row(0).array();
  const auto ia = alpha.id();
  const auto ib = beta.id();
  return h.tape().record(std::move(out), {h, alpha, beta},
                         [ih, ia, ib, cache, normalized_grad](const Matrix& g, Tape& t) {
                           if (t.requires_grad(ia)) {
                             t.accumulate(ia, g.cwiseProduct(cache->z).colwise().sum());
                           }
                           if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
                           if (t.requires_grad(ih)) {
                             Matrix gz = g;
                             gz.array().rowwise() *= t.value(ia).row(0).array();
                             t.accumulate(ih, normalized_grad(gz));
                           }
                         });
}

}  // namespace nodenorm
