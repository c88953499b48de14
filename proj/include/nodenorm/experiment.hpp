#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <nodenorm/dataset.hpp>
#include <nodenorm/diagnostics.hpp>
#include <nodenorm/model.hpp>

namespace nodenorm {

using Json = nlohmann::json;

inline constexpr int kRecordFormatVersion = 1;

struct DatasetSource {
  std::optional<std::filesystem::path> bundle;
  std::optional<SbmParams> sbm;
  std::uint64_t sbm_seed = 0;
};

struct TrainParams {
  double lr = 0.005;
  double weight_decay = 5e-4;
  double l1_weight = 0.0;
  double dropout = 0.5;
  int epochs = 400;
};

struct DiagnosticToggles {
  bool variance_profile = false;
  bool lipschitz = false;
  bool correlation = false;
  /// Variance-bin gaps between the deepest and shallowest depth of a sweep.
  bool bins = false;
  /// Sampled pairs for graphs above kExactLipschitzNodes nodes.
  std::size_t lipschitz_pair_limit = 1000000;
};

/// One training run. `model.input_dim` and `model.num_classes` are filled in
/// from the dataset.
struct RunConfig {
  DatasetSource dataset;
  SplitSpec split;
  double missing_rate = 0.0;
  bool protect_train = true;
  ModelSpec model;
  TrainParams train;
  std::uint64_t seed = 0;
  DiagnosticToggles diagnostics;
  /// {"<variant or *>": {"<depth>": {train fields}}}; consulted by sweep.
  Json presets = Json::object();

  void validate() const;
};

/// Parses the JSON config layout documented in the README. Unknown keys are
/// rejected with ConfigError.
RunConfig config_from_json(const Json& j);
Json to_json(const RunConfig& config);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(Json& doc, const std::string& assignment);

Json read_json_file(const std::filesystem::path& file);

/// Short name for an architecture/norm pair: "gcn", "tgcn", "nodenorm2",
/// "layernorm-ms", "tgcn+nodenorm1", ...
std::string variant_name(Architecture arch, NormKind norm);
/// Inverse of variant_name.
std::pair<Architecture, NormKind> parse_variant(const std::string& name);

struct RunRecord {
  Json config;
  std::string variant;
  int depth = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";

  std::vector<EpochMetrics> history;
  double test_acc = 0.0;
  double wall_seconds = 0.0;
  OverfitGaps gaps;

  std::optional<VarianceProfile> variance;
  std::optional<LipschitzEstimate> lipschitz;
  /// ‖corr‖_F of every hidden layer output (logits excluded).
  std::vector<double> correlation_norms;
  std::optional<BinReport> bins;
  /// Test-node last-layer variance and correctness, kept for bin reports.
  std::vector<std::size_t> test_nodes;
  std::vector<double> test_last_variance;
  std::vector<bool> test_correct;

  bool ok() const { return status == "ok"; }
};

Json to_json(const RunRecord& record);

/// Dataset with split and feature masking applied, plus its propagation
/// operator.
struct PreparedData {
  GraphDataset dataset;
  SparseAdjacency<double> propagation;
};

/// Loads or generates the base dataset named by the config.
GraphDataset load_source(const DatasetSource& source);

/// Split and masking for `config.seed`; `base` defaults to load_source.
PreparedData prepare_data(const RunConfig& config, const GraphDataset* base = nullptr);

struct TrainResult {
  RunRecord record;
  Model model;
};

/// Full-batch training for exactly config.train.epochs epochs, then test
/// evaluation and the enabled diagnostics.
TrainResult train(const RunConfig& config, const GraphDataset* base = nullptr);

/// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Matrix& logits, std::span<const int> labels, const std::vector<bool>& mask);

struct AggregateRow {
  std::string variant;
  int depth = 0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_test_acc = 0.0;
  /// Sample standard deviation; 0 for fewer than two runs.
  double std_test_acc = 0.0;
};

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records);

struct SweepOptions {
  std::vector<int> depths;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  /// 0 = hardware concurrency.
  unsigned workers = 0;
};

/// Runs the Cartesian product variants × depths × seeds. A failing cell is
/// recorded with its error and the sweep continues. Output order is fixed by
/// the product order, independent of scheduling.
std::vector<RunRecord> sweep(const RunConfig& base, const SweepOptions& options);

/// Applies the preset matching (variant, depth) to a copy of `base`.
RunConfig resolve_cell(const RunConfig& base, const std::string& variant, int depth, std::uint64_t seed);

struct ReportManifest {
  std::vector<std::string> written;
  /// file → reason
  std::vector<std::pair<std::string, std::string>> skipped;
};

/// results.csv, aggregate.csv, records/*.json, figures/*.svg, manifest.json.
ReportManifest emit_reports(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir);

std::string results_csv(const std::vector<RunRecord>& records);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

}  // namespace nodenorm
