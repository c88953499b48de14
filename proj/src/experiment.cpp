#include <nodenorm/experiment.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "internal.hpp"

namespace nodenorm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool any(const std::vector<bool>& mask) {
  return std::find(mask.begin(), mask.end(), true) != mask.end();
}

double masked_loss(const Matrix& logits, std::span<const int> labels, const std::vector<bool>& mask) {
  if (!any(mask)) return kNaN;
  Tape tape;
  return softmax_cross_entropy(tape.constant(logits), labels, mask).value()(0, 0);
}

Eigen::Index argmax_row(const Matrix& logits, Eigen::Index i) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < logits.cols(); ++c) {
    if (logits(i, c) > logits(i, best)) best = c;
  }
  return best;
}

}  // namespace

double accuracy(const Matrix& logits, std::span<const int> labels, const std::vector<bool>& mask) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    if (argmax_row(logits, static_cast<Eigen::Index>(i)) == labels[i]) ++correct;
  }
  return total == 0 ? kNaN : static_cast<double>(correct) / static_cast<double>(total);
}

GraphDataset load_source(const DatasetSource& source) {
  if (source.bundle) return load_bundle(*source.bundle);
  if (source.sbm) {
    Rng rng(Rng::derive(source.sbm_seed, static_cast<std::uint64_t>(Stream::kGraph)));
    return generate_sbm(*source.sbm, rng);
  }
  throw ConfigError("dataset source is empty");
}

PreparedData prepare_data(const RunConfig& config, const GraphDataset* base) {
  GraphDataset loaded;
  if (base == nullptr) {
    loaded = load_source(config.dataset);
    base = &loaded;
  }
  Rng split_rng = make_stream(config.seed, Stream::kSplit);
  GraphDataset ds = make_split(*base, config.split, split_rng);
  if (config.missing_rate > 0.0) {
    Rng mask_rng = make_stream(config.seed, Stream::kFeatureMask);
    ds = mask_features(ds, config.missing_rate, config.protect_train, mask_rng);
  }
  if (ds.splits->train_count() == 0) throw DataError("split leaves no training nodes");
  SparseAdjacency<double> propagation = renormalize(ds.adjacency());
  return {std::move(ds), std::move(propagation)};
}

TrainResult train(const RunConfig& config, const GraphDataset* base) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  PreparedData data = prepare_data(config, base);
  const GraphDataset& ds = data.dataset;
  const Splits& splits = *ds.splits;
  const SparseAdjacency<double>& adj = data.propagation;

  ModelSpec spec = config.model;
  spec.input_dim = static_cast<int>(ds.feature_dim());
  spec.num_classes = ds.num_classes;
  spec.dropout_rate = config.train.dropout;

  Rng init_rng = make_stream(config.seed, Stream::kInit);
  Rng dropout_rng = make_stream(config.seed, Stream::kDropout);
  Model model = build_model(spec, init_rng);

  AdamState weight_state;
  AdamState alpha_state;
  AdamState beta_state;
  RunRecord record;
  record.config = to_json(config);
  record.variant = variant_name(spec.architecture, spec.norm);
  record.depth = spec.depth;
  record.seed = config.seed;

  Evaluation eval;
  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    {
      Tape tape;
      const ForwardPass pass = forward(model, tape, tape.constant(ds.features), adj, true, dropout_rng);
      Var loss = softmax_cross_entropy(pass.logits, ds.labels, splits.train);
      if (config.train.l1_weight > 0.0) loss = add(loss, l1_penalty(pass.params.weights, config.train.l1_weight));
      tape.backward(loss);

      auto grads_of = [](const std::vector<Var>& vars) {
        std::vector<Matrix> grads;
        grads.reserve(vars.size());
        for (const Var& v : vars) grads.push_back(v.grad());
        return grads;
      };
      const auto weight_grads = grads_of(pass.params.weights);
      adam_step(model.weights, weight_grads, weight_state, config.train.lr, config.train.weight_decay);
      if (!model.norm_alpha.empty()) {
        const auto alpha_grads = grads_of(pass.params.norm_alpha);
        const auto beta_grads = grads_of(pass.params.norm_beta);
        adam_step(model.norm_alpha, alpha_grads, alpha_state, config.train.lr, 0.0);
        adam_step(model.norm_beta, beta_grads, beta_state, config.train.lr, 0.0);
      }
    }

    eval = evaluate(model, ds.features, adj);
    EpochMetrics metrics;
    metrics.train_loss = masked_loss(eval.logits, ds.labels, splits.train);
    metrics.train_acc = accuracy(eval.logits, ds.labels, splits.train);
    metrics.val_loss = masked_loss(eval.logits, ds.labels, splits.val);
    metrics.val_acc = accuracy(eval.logits, ds.labels, splits.val);
    record.history.push_back(metrics);
  }

  record.test_acc = accuracy(eval.logits, ds.labels, splits.test);
  record.gaps = overfit_gaps(record.history);

  const DiagnosticToggles& diag = config.diagnostics;
  if (diag.variance_profile) {
    VarianceProfile profile;
    for (std::size_t l = 0; l < eval.hidden.size(); ++l) {
      profile.per_layer.push_back(node_variance(eval.hidden[l]));
      profile.layer_indices.push_back(static_cast<int>(l) + 1);
    }
    record.variance = std::move(profile);
  }
  if (diag.lipschitz) {
    Rng pair_rng = make_stream(config.seed, Stream::kLipschitz);
    std::optional<std::size_t> limit;
    if (ds.n() > kExactLipschitzNodes) limit = diag.lipschitz_pair_limit;
    record.lipschitz = graph_lipschitz(ds.features, eval.logits, limit, pair_rng);
  }
  if (diag.correlation) {
    for (std::size_t l = 0; l + 1 < eval.hidden.size(); ++l) {
      record.correlation_norms.push_back(correlation_frobenius(eval.hidden[l]));
    }
  }
  if (diag.bins) {
    const Vector last_variance = node_variance(eval.logits);
    for (std::size_t i = 0; i < splits.test.size(); ++i) {
      if (!splits.test[i]) continue;
      record.test_nodes.push_back(i);
      record.test_last_variance.push_back(last_variance(static_cast<Eigen::Index>(i)));
      record.test_correct.push_back(argmax_row(eval.logits, static_cast<Eigen::Index>(i)) == ds.labels[i]);
    }
  }

  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(record), std::move(model)};
}

RunConfig resolve_cell(const RunConfig& base, const std::string& variant, int depth, std::uint64_t seed) {
  RunConfig cell = base;
  const auto [arch, norm] = parse_variant(variant);
  cell.model.architecture = arch;
  cell.model.norm = norm;
  cell.model.depth = depth;
  cell.seed = seed;
  const std::string depth_key = std::to_string(depth);
  for (const std::string& key : {variant, std::string("*")}) {
    if (!base.presets.contains(key)) continue;
    const Json& by_depth = base.presets.at(key);
    if (!by_depth.contains(depth_key)) continue;
    apply_train_fields(by_depth.at(depth_key), cell.train, "presets." + key + "." + depth_key);
    break;
  }
  cell.model.dropout_rate = cell.train.dropout;
  return cell;
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records) {
  std::vector<AggregateRow> rows;
  std::map<std::pair<std::string, int>, std::size_t> index;
  std::vector<std::vector<double>> values;
  for (const RunRecord& r : records) {
    const auto key = std::make_pair(r.variant, r.depth);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({r.variant, r.depth});
      values.emplace_back();
    }
    AggregateRow& row = rows[it->second];
    ++row.runs;
    if (!r.ok()) {
      ++row.failed;
      continue;
    }
    values[it->second].push_back(r.test_acc);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& v = values[k];
    if (v.empty()) {
      rows[k].mean_test_acc = kNaN;
      rows[k].std_test_acc = kNaN;
      continue;
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    rows[k].mean_test_acc = mean;
    rows[k].std_test_acc = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return rows;
}

std::vector<RunRecord> sweep(const RunConfig& base, const SweepOptions& options) {
  if (options.depths.empty() || options.seeds.empty() || options.variants.empty()) {
    throw ConfigError("sweep needs at least one depth, seed and variant");
  }
  base.validate();
  for (const auto& v : options.variants) parse_variant(v);

  struct Cell {
    std::string variant;
    int depth;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& variant : options.variants) {
    for (int depth : options.depths) {
      for (auto seed : options.seeds) cells.push_back({variant, depth, seed});
    }
  }

  const GraphDataset dataset = load_source(base.dataset);
  std::vector<RunRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      const Cell& cell = cells[k];
      RunConfig config;
      try {
        config = resolve_cell(base, cell.variant, cell.depth, cell.seed);
        records[k] = train(config, &dataset).record;
      } catch (const std::exception& e) {
        RunRecord failed;
        failed.config = to_json(config);
        failed.variant = cell.variant;
        failed.depth = cell.depth;
        failed.seed = cell.seed;
        failed.status = std::string("error: ") + e.what();
        records[k] = std::move(failed);
      }
    }
  };

  unsigned workers = options.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.workers;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (base.diagnostics.bins && options.depths.size() > 1) {
    const int shallow = *std::min_element(options.depths.begin(), options.depths.end());
    const int deep = *std::max_element(options.depths.begin(), options.depths.end());
    auto find = [&](const std::string& variant, int depth, std::uint64_t seed) -> RunRecord* {
      for (RunRecord& r : records) {
        if (r.ok() && r.variant == variant && r.depth == depth && r.seed == seed) return &r;
      }
      return nullptr;
    };
    for (const auto& variant : options.variants) {
      const std::string name = variant_name(parse_variant(variant).first, parse_variant(variant).second);
      for (auto seed : options.seeds) {
        RunRecord* d = find(name, deep, seed);
        RunRecord* s = find(name, shallow, seed);
        if (d == nullptr || s == nullptr || d->bins || d->test_nodes != s->test_nodes) continue;
        if (d->test_nodes.size() < static_cast<std::size_t>(BinReport::kBins)) continue;
        d->bins = variance_bins(d->test_last_variance, d->test_correct, s->test_correct);
      }
    }
  }
  return records;
}

}  // namespace nodenorm
