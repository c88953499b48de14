#include <CLI11.hpp>

#include <nodenorm/checkpoint.hpp>
#include <nodenorm/experiment.hpp>

#include <fstream>
#include <iostream>

using namespace nodenorm;

namespace {

/// "0..9" (inclusive range) or "0,3,7".
template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> values;
  auto to_number = [&](const std::string& s) -> T {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size() || v < 0) throw ConfigError("");
      return static_cast<T>(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("invalid ") + what + " '" + s + "'");
    }
  };
  const auto range = text.find("..");
  if (range != std::string::npos) {
    const T lo = to_number(text.substr(0, range));
    const T hi = to_number(text.substr(range + 2));
    if (hi < lo) throw ConfigError(std::string("empty ") + what + " range '" + text + "'");
    for (T v = lo; v <= hi; ++v) values.push_back(v);
    return values;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(to_number(item));
  if (values.empty()) throw ConfigError(std::string("no ") + what + " given");
  return values;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> names;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) names.push_back(item);
  }
  return names;
}

Json load_config_doc(const std::string& path, const std::vector<std::string>& overrides) {
  Json doc = read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return doc;
}

void print_manifest(const ReportManifest& manifest, const std::filesystem::path& out) {
  std::cout << "wrote " << manifest.written.size() << " files to " << out.string() << "\n";
  for (const auto& [file, reason] : manifest.skipped) std::cout << "skipped " << file << ": " << reason << "\n";
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& out) {
  const RunConfig config = config_from_json(load_config_doc(config_path, overrides));
  TrainResult result = train(config);
  const auto manifest = emit_reports({result.record}, out);
  save_checkpoint({result.model, result.record.config}, std::filesystem::path(out) / "model.ckpt");
  print_manifest(manifest, out);
  std::cout << result.record.variant << " depth " << result.record.depth << " seed " << result.record.seed
            << " test_acc " << result.record.test_acc << "\n";
  return 0;
}

int run_sweep(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& depths,
              const std::string& seeds, const std::string& variants, unsigned workers, const std::string& out) {
  const RunConfig base = config_from_json(load_config_doc(config_path, overrides));
  SweepOptions options;
  options.depths = parse_list<int>(depths, "depth");
  options.seeds = parse_list<std::uint64_t>(seeds, "seed");
  options.variants = split_names(variants);
  options.workers = workers;
  const auto records = sweep(base, options);
  const auto manifest = emit_reports(records, out);
  print_manifest(manifest, out);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.ok() ? 0 : 1;
  std::cout << records.size() << " runs, " << failed << " failed\n";
  return 0;
}

/// Prepared data for a checkpoint: its own config, optionally pointed at a
/// different bundle.
PreparedData data_for(const Checkpoint& checkpoint, const std::string& dataset) {
  if (checkpoint.config.is_null()) {
    if (dataset.empty()) throw ConfigError("checkpoint has no config; pass --dataset");
    RunConfig config;
    config.dataset.bundle = dataset;
    config.split = SplitSpec::fixed();
    return prepare_data(config);
  }
  Json doc = checkpoint.config;
  if (!dataset.empty()) doc["dataset"] = {{"bundle", dataset}};
  return prepare_data(config_from_json(doc));
}

int run_diagnose(const std::string& checkpoint_path, const std::string& dataset, const std::string& shallow_path,
                 std::size_t pair_limit, const std::string& out) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const PreparedData data = data_for(checkpoint, dataset);
  const GraphDataset& ds = data.dataset;
  if (ds.feature_dim() != checkpoint.model.spec.input_dim || ds.num_classes != checkpoint.model.spec.num_classes) {
    throw DataError("dataset shape does not match the checkpoint");
  }
  const Evaluation eval = evaluate(checkpoint.model, ds.features, data.propagation);

  Json report;
  report["depth"] = checkpoint.model.spec.depth;
  report["variant"] = variant_name(checkpoint.model.spec.architecture, checkpoint.model.spec.norm);
  report["test_acc"] = accuracy(eval.logits, ds.labels, ds.splits->test);
  Json layers = Json::array();
  Json corr = Json::array();
  for (std::size_t l = 0; l < eval.hidden.size(); ++l) {
    const Vector v = node_variance(eval.hidden[l]);
    layers.push_back({{"layer", l + 1}, {"mean_node_variance", v.mean()}});
    if (l + 1 < eval.hidden.size()) corr.push_back(correlation_frobenius(eval.hidden[l]));
  }
  report["variance_profile"] = layers;
  report["correlation_norms"] = corr;
  Rng rng = make_stream(0, Stream::kLipschitz);
  const auto lip = graph_lipschitz(checkpoint.model, ds.features, data.propagation, pair_limit, rng);
  report["lipschitz"] = {{"value", lip.value}, {"exact", lip.exact}, {"pairs_used", lip.pairs_used}};

  if (!shallow_path.empty()) {
    const Checkpoint shallow = load_checkpoint(shallow_path);
    const Evaluation shallow_eval = evaluate(shallow.model, ds.features, data.propagation);
    const Vector last = node_variance(eval.logits);
    std::vector<double> variance;
    std::vector<bool> deep_ok;
    std::vector<bool> shallow_ok;
    std::vector<bool> one(ds.labels.size(), false);
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
      if (!ds.splits->test[i]) continue;
      one[i] = true;
      variance.push_back(last(static_cast<Eigen::Index>(i)));
      deep_ok.push_back(accuracy(eval.logits, ds.labels, one) == 1.0);
      shallow_ok.push_back(accuracy(shallow_eval.logits, ds.labels, one) == 1.0);
      one[i] = false;
    }
    const BinReport bins = variance_bins(variance, deep_ok, shallow_ok);
    report["bins"] = {{"acc_shallow", bins.acc_shallow}, {"acc_deep", bins.acc_deep}, {"gap", bins.gap}};
  }

  std::filesystem::create_directories(out);
  std::ofstream file(std::filesystem::path(out) / "diagnostics.json");
  file << report.dump(2) << "\n";
  if (!file) throw IoError("cannot write diagnostics.json");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int run_gen_sbm(const SbmParams& params, std::uint64_t seed, const std::string& out) {
  DatasetSource source;
  source.sbm = params;
  source.sbm_seed = seed;
  GraphDataset ds = load_source(source);
  save_bundle(ds, out);
  std::cout << "wrote SBM bundle with " << ds.n() << " nodes and " << ds.edges.size() << " edges to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep GCN training with node normalization"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;

  auto* train_cmd = app.add_subcommand("train", "Train one model and write its reports and checkpoint");
  train_cmd->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--set", overrides, "Override a config field, e.g. model.depth=8");
  train_cmd->add_option("--out", out, "Output directory")->required();

  std::string depths;
  std::string seeds = "0";
  std::string variants;
  unsigned workers = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train every variant x depth x seed combination");
  sweep_cmd->add_option("--config", config_path, "JSON base config")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--set", overrides, "Override a config field");
  sweep_cmd->add_option("--depths", depths, "Depths, e.g. 2,4,8 or 2..8")->required();
  sweep_cmd->add_option("--seeds", seeds, "Seeds, e.g. 0..9");
  sweep_cmd->add_option("--variants", variants, "Comma-separated variants, e.g. gcn,nodenorm2,tgcn")->required();
  sweep_cmd->add_option("--workers", workers, "Parallel runs (0 = all cores)");
  sweep_cmd->add_option("--out", out, "Output directory")->required();

  std::string checkpoint_path;
  std::string dataset;
  std::string shallow_path;
  std::size_t pair_limit = 1000000;
  auto* diag_cmd = app.add_subcommand("diagnose", "Compute diagnostics for a trained checkpoint");
  diag_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  diag_cmd->add_option("--dataset", dataset, "Bundle directory (defaults to the checkpoint's config)");
  diag_cmd->add_option("--shallow-checkpoint", shallow_path, "Shallow model for variance-bin accuracy gaps")
      ->check(CLI::ExistingFile);
  diag_cmd->add_option("--pair-limit", pair_limit, "Sampled Lipschitz pairs for large graphs");
  diag_cmd->add_option("--out", out, "Output directory")->required();

  SbmParams sbm;
  std::uint64_t sbm_seed = 0;
  auto* sbm_cmd = app.add_subcommand("gen-sbm", "Write a stochastic block model dataset bundle");
  sbm_cmd->add_option("--blocks", sbm.blocks, "Number of blocks (classes)")->required();
  sbm_cmd->add_option("--nodes-per-block", sbm.nodes_per_block, "Nodes per block")->required();
  sbm_cmd->add_option("--p-in", sbm.p_in, "Within-block edge probability")->required();
  sbm_cmd->add_option("--p-out", sbm.p_out, "Between-block edge probability")->required();
  sbm_cmd->add_option("--feature-dim", sbm.feature_dim, "Feature dimension");
  sbm_cmd->add_option("--noise", sbm.feature_noise, "Feature noise standard deviation");
  sbm_cmd->add_option("--seed", sbm_seed, "Generator seed");
  sbm_cmd->add_option("--out", out, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return run_train(config_path, overrides, out);
    if (*sweep_cmd) return run_sweep(config_path, overrides, depths, seeds, variants, workers, out);
    if (*diag_cmd) return run_diagnose(checkpoint_path, dataset, shallow_path, pair_limit, out);
    if (*sbm_cmd) return run_gen_sbm(sbm, sbm_seed, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const StructuralError& e) {
    std::cerr << "structural error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
