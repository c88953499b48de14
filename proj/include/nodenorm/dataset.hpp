#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nodenorm/dense.hpp>
#include <nodenorm/rng.hpp>
#include <nodenorm/sparse_adjacency.hpp>

namespace nodenorm {

struct Splits {
  std::vector<bool> train;
  std::vector<bool> val;
  std::vector<bool> test;

  std::size_t train_count() const;
  std::size_t val_count() const;
  std::size_t test_count() const;
};

/// Node-classification graph: features, labels (-1 = unlabeled), undirected
/// edges (u < v, unique, no self-loops) and optional split masks.
struct GraphDataset {
  std::string name;
  int num_classes = 0;
  Matrix features;
  std::vector<int> labels;
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::optional<Splits> splits;

  std::int64_t n() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t feature_dim() const { return features.cols(); }

  SparseAdjacency<double> adjacency() const;
  /// Throws DataError when an invariant is broken.
  void validate() const;
};

struct LoadStats {
  /// Self-loops and repeated edges dropped while loading.
  std::size_t dropped_edges = 0;
};

/// Reads a bundle directory:
///   meta.json    {"n", "d", "num_classes", "name"}
///   edges.tsv    "u<TAB>v" per line, 0-based
///   features.csv n lines of d comma-separated reals
///   labels.txt   n lines, class id or -1
///   splits.json  optional {"train": [...], "val": [...], "test": [...]}
GraphDataset load_bundle(const std::filesystem::path& dir, LoadStats* stats = nullptr);

/// Writes the layout load_bundle reads; reals use 17 significant digits.
void save_bundle(const GraphDataset& ds, const std::filesystem::path& dir);

struct SplitSpec {
  enum class Kind { kPerClass, kFraction, kFixed };

  Kind kind = Kind::kPerClass;
  int per_class = 20;
  int val_size = 500;
  int test_size = 1000;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;

  static SplitSpec per_class_split(int k, int val, int test) {
    SplitSpec s;
    s.kind = Kind::kPerClass;
    s.per_class = k;
    s.val_size = val;
    s.test_size = test;
    return s;
  }
  static SplitSpec fraction_split(double train, double val, double test) {
    SplitSpec s;
    s.kind = Kind::kFraction;
    s.train_fraction = train;
    s.val_fraction = val;
    s.test_fraction = test;
    return s;
  }
  static SplitSpec fixed() {
    SplitSpec s;
    s.kind = Kind::kFixed;
    return s;
  }
};

/// PerClass(k): k labeled nodes per class (ascending class order) for train,
/// then val_size and test_size from the shuffled remaining labeled nodes.
/// Fraction: shuffle labeled nodes and cut proportionally. Fixed: keep the
/// bundle's splits.
GraphDataset make_split(const GraphDataset& ds, const SplitSpec& spec, Rng& rng);

/// Zeros the feature rows of round(rate · |eligible|) nodes drawn without
/// replacement; eligible = non-training nodes when protect_train, else all.
GraphDataset mask_features(const GraphDataset& ds, double missing_rate, bool protect_train, Rng& rng);

struct SbmParams {
  int blocks = 4;
  int nodes_per_block = 100;
  double p_in = 0.1;
  double p_out = 0.01;
  int feature_dim = 16;
  double feature_noise = 0.5;
};

/// Stochastic block model with one-hot block centroids plus Gaussian noise
/// as features and block ids as labels.
GraphDataset generate_sbm(const SbmParams& params, Rng& rng);

}  // namespace nodenorm
