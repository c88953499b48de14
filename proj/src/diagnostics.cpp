#include <nodenorm/diagnostics.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nodenorm {

BinReport variance_bins(std::span<const double> deep_variance, const std::vector<bool>& correct_deep,
                        const std::vector<bool>& correct_shallow) {
  const std::size_t n = deep_variance.size();
  if (correct_deep.size() != n || correct_shallow.size() != n) {
    throw ValidationError("variance_bins: arrays differ in length");
  }
  if (n < static_cast<std::size_t>(BinReport::kBins)) {
    throw ValidationError("variance_bins: needs at least 5 nodes, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return deep_variance[a] < deep_variance[b]; });

  BinReport report;
  const std::size_t base = n / BinReport::kBins;
  const std::size_t extra = n % BinReport::kBins;
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < static_cast<std::size_t>(BinReport::kBins); ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    std::vector<std::size_t> members(order.begin() + cursor, order.begin() + cursor + size);
    cursor += size;
    double deep = 0.0;
    double shallow = 0.0;
    for (auto i : members) {
      deep += correct_deep[i] ? 1.0 : 0.0;
      shallow += correct_shallow[i] ? 1.0 : 0.0;
    }
    deep /= static_cast<double>(size);
    shallow /= static_cast<double>(size);
    report.bins.push_back(std::move(members));
    report.acc_deep.push_back(deep);
    report.acc_shallow.push_back(shallow);
    report.gap.push_back(shallow - deep);
  }
  return report;
}

std::vector<Vector> VarianceProfile::log10() const {
  std::vector<Vector> out;
  out.reserve(per_layer.size());
  for (const auto& v : per_layer) out.push_back(v.array().log10().matrix());
  return out;
}

VarianceProfile variance_profile(const Model& model, const Matrix& x, const SparseAdjacency<double>& adj) {
  const Evaluation eval = evaluate(model, x, adj);
  VarianceProfile profile;
  for (std::size_t l = 0; l < eval.hidden.size(); ++l) {
    profile.per_layer.push_back(node_variance(eval.hidden[l]));
    profile.layer_indices.push_back(static_cast<int>(l) + 1);
  }
  return profile;
}

namespace {

constexpr double kDuplicateInputDistance = 1e-12;

}  // namespace

LipschitzEstimate graph_lipschitz(const Matrix& inputs, const Matrix& outputs, std::optional<std::size_t> pair_limit,
                                  Rng& rng) {
  if (inputs.rows() != outputs.rows()) throw ShapeError("graph_lipschitz: inputs and outputs differ in rows");
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (n < 2) throw ValidationError("graph_lipschitz: needs at least 2 nodes");

  LipschitzEstimate estimate;
  auto consider = [&](std::size_t i, std::size_t j) {
    const double dx = (inputs.row(i) - inputs.row(j)).norm();
    if (dx < kDuplicateInputDistance) {
      ++estimate.pairs_skipped;
      return;
    }
    ++estimate.pairs_used;
    estimate.value = std::max(estimate.value, (outputs.row(i) - outputs.row(j)).norm() / dx);
  };

  const std::size_t total = n * (n - 1) / 2;
  if (!pair_limit || *pair_limit >= total) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) consider(i, j);
    }
  } else {
    estimate.exact = false;
    for (std::size_t s = 0; s < *pair_limit; ++s) {
      const auto i = static_cast<std::size_t>(rng.below(n));
      auto j = static_cast<std::size_t>(rng.below(n - 1));
      if (j >= i) ++j;
      consider(i, j);
    }
  }
  if (estimate.pairs_used == 0) throw ValidationError("graph_lipschitz: every considered pair has identical inputs");
  return estimate;
}

LipschitzEstimate graph_lipschitz(const Model& model, const Matrix& x, const SparseAdjacency<double>& adj,
                                  std::optional<std::size_t> pair_limit, Rng& rng) {
  const Evaluation eval = evaluate(model, x, adj);
  if (x.rows() <= kExactLipschitzNodes) pair_limit.reset();
  return graph_lipschitz(x, eval.logits, pair_limit, rng);
}

OverfitGaps overfit_gaps(std::span<const EpochMetrics> history) {
  if (history.empty()) throw ValidationError("overfit_gaps: empty history");
  const EpochMetrics& last = history.back();
  return {last.train_acc - last.val_acc, last.train_loss - last.val_loss};
}

OverfitGaps overfit_gaps(std::span<const double> train_acc, std::span<const double> val_acc,
                         std::span<const double> train_loss, std::span<const double> val_loss) {
  const std::size_t n = train_acc.size();
  if (n == 0) throw ValidationError("overfit_gaps: empty history");
  if (val_acc.size() != n || train_loss.size() != n || val_loss.size() != n) {
    throw ValidationError("overfit_gaps: histories are misaligned");
  }
  return {train_acc[n - 1] - val_acc[n - 1], train_loss[n - 1] - val_loss[n - 1]};
}

}  // namespace nodenorm
