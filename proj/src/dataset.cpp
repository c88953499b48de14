#include <nodenorm/dataset.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include <nodenorm/errors.hpp>
#include <nodenorm/format.hpp>

namespace nodenorm {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::size_t count_true(const std::vector<bool>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

std::string where(const fs::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

std::ifstream open_input(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

json read_json(const fs::path& file) {
  std::ifstream in = open_input(file);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(file.filename().string() + ": " + e.what());
  }
}

std::vector<bool> mask_from_ids(const json& ids, std::int64_t n, const std::string& key, const fs::path& file) {
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  if (!ids.is_array()) throw DataError(file.filename().string() + ": '" + key + "' must be an array");
  for (const auto& id : ids) {
    if (!id.is_number_integer()) throw DataError(file.filename().string() + ": non-integer id in '" + key + "'");
    const auto i = id.get<std::int64_t>();
    if (i < 0 || i >= n) {
      throw DataError(file.filename().string() + ": id " + std::to_string(i) + " in '" + key + "' out of range");
    }
    mask[static_cast<std::size_t>(i)] = true;
  }
  return mask;
}

json ids_from_mask(const std::vector<bool>& mask) {
  json ids = json::array();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) ids.push_back(i);
  }
  return ids;
}

std::vector<std::size_t> labeled_nodes(const GraphDataset& ds) {
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] >= 0) nodes.push_back(i);
  }
  return nodes;
}

}  // namespace

std::size_t Splits::train_count() const { return count_true(train); }
std::size_t Splits::val_count() const { return count_true(val); }
std::size_t Splits::test_count() const { return count_true(test); }

SparseAdjacency<double> GraphDataset::adjacency() const {
  return SparseAdjacency<double>::from_edges(n(), edges);
}

void GraphDataset::validate() const {
  const auto count = n();
  if (features.rows() != count) throw DataError("feature rows differ from label count");
  if (num_classes < 1) throw DataError("num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < -1 || labels[i] >= num_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " of node " + std::to_string(i) + " out of range");
    }
  }
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= count || v >= count) throw DataError("edge endpoint out of range");
  }
  if (splits) {
    const Splits& s = *splits;
    const auto size = static_cast<std::size_t>(count);
    if (s.train.size() != size || s.val.size() != size || s.test.size() != size) {
      throw DataError("split masks have the wrong length");
    }
    for (std::size_t i = 0; i < size; ++i) {
      const int memberships = int(s.train[i]) + int(s.val[i]) + int(s.test[i]);
      if (memberships > 1) throw DataError("node " + std::to_string(i) + " belongs to several splits");
      if (memberships == 1 && labels[i] < 0) {
        throw DataError("unlabeled node " + std::to_string(i) + " assigned to a split");
      }
    }
  }
}

GraphDataset load_bundle(const fs::path& dir, LoadStats* stats) {
  if (!fs::is_directory(dir)) throw DataError("bundle directory not found: " + dir.string());

  const fs::path meta_file = dir / "meta.json";
  const json meta = read_json(meta_file);
  std::int64_t n = 0;
  std::int64_t d = 0;
  GraphDataset ds;
  try {
    n = meta.at("n").get<std::int64_t>();
    d = meta.at("d").get<std::int64_t>();
    ds.num_classes = meta.at("num_classes").get<int>();
    ds.name = meta.value("name", std::string("unnamed"));
  } catch (const json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }
  if (n < 1 || d < 1 || ds.num_classes < 1) throw DataError("meta.json: n, d and num_classes must be positive");

  // features.csv
  {
    const fs::path file = dir / "features.csv";
    std::ifstream in = open_input(file);
    ds.features.resize(n, d);
    std::string line;
    std::int64_t row = 0;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      if (row >= n) throw DataError(where(file, row + 1) + ": more than n=" + std::to_string(n) + " rows");
      std::string_view rest(line);
      for (std::int64_t col = 0; col < d; ++col) {
        const auto comma = rest.find(',');
        const std::string_view cell = rest.substr(0, comma);
        if (col + 1 < d && comma == std::string_view::npos) {
          throw DataError(where(file, row + 1) + ": expected " + std::to_string(d) + " values");
        }
        if (col + 1 == d && comma != std::string_view::npos) {
          throw DataError(where(file, row + 1) + ": more than " + std::to_string(d) + " values");
        }
        double value = 0.0;
        if (!parse_number(cell, value)) {
          throw DataError(where(file, row + 1) + ": bad real '" + std::string(cell) + "'");
        }
        ds.features(row, col) = value;
        rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
      }
      ++row;
    }
    if (row != n) {
      throw DataError(file.filename().string() + ": " + std::to_string(row) + " rows, meta.json says " +
                      std::to_string(n));
    }
  }

  // labels.txt
  {
    const fs::path file = dir / "labels.txt";
    std::ifstream in = open_input(file);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      int label = 0;
      if (!parse_number(std::string_view(line), label)) throw DataError(where(file, line_no) + ": bad label");
      if (label < -1 || label >= ds.num_classes) {
        throw DataError(where(file, line_no) + ": label " + std::to_string(label) + " outside [-1, " +
                        std::to_string(ds.num_classes) + ")");
      }
      ds.labels.push_back(label);
    }
    if (static_cast<std::int64_t>(ds.labels.size()) != n) {
      throw DataError(file.filename().string() + ": " + std::to_string(ds.labels.size()) +
                      " labels, meta.json says " + std::to_string(n));
    }
  }

  // edges.tsv
  {
    const fs::path file = dir / "edges.tsv";
    std::ifstream in = open_input(file);
    std::set<std::pair<std::int64_t, std::int64_t>> unique;
    std::size_t dropped = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto tab = line.find('\t');
      std::int64_t u = 0;
      std::int64_t v = 0;
      if (tab == std::string::npos || !parse_number(std::string_view(line).substr(0, tab), u) ||
          !parse_number(std::string_view(line).substr(tab + 1), v)) {
        throw DataError(where(file, line_no) + ": expected 'u<TAB>v'");
      }
      if (u < 0 || v < 0 || u >= n || v >= n) {
        throw DataError(where(file, line_no) + ": endpoint out of range [0, " + std::to_string(n) + ")");
      }
      if (u == v || !unique.emplace(std::min(u, v), std::max(u, v)).second) ++dropped;
    }
    ds.edges.assign(unique.begin(), unique.end());
    if (dropped > 0) {
      std::cerr << "warning: " << dir.string() << ": dropped " << dropped << " self-loop/duplicate edges\n";
    }
    if (stats != nullptr) stats->dropped_edges = dropped;
  }

  // splits.json
  const fs::path split_file = dir / "splits.json";
  if (fs::exists(split_file)) {
    const json splits = read_json(split_file);
    Splits s;
    try {
      s.train = mask_from_ids(splits.at("train"), n, "train", split_file);
      s.val = mask_from_ids(splits.at("val"), n, "val", split_file);
      s.test = mask_from_ids(splits.at("test"), n, "test", split_file);
    } catch (const json::out_of_range& e) {
      throw DataError("splits.json: " + std::string(e.what()));
    }
    ds.splits = std::move(s);
  }

  ds.validate();
  return ds;
}

void save_bundle(const GraphDataset& ds, const fs::path& dir) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  auto open_output = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };

  {
    json meta = {{"n", ds.n()}, {"d", ds.feature_dim()}, {"num_classes", ds.num_classes}, {"name", ds.name}};
    auto out = open_output("meta.json");
    out << meta.dump(2) << '\n';
  }
  {
    auto out = open_output("edges.tsv");
    for (const auto& [u, v] : ds.edges) out << u << '\t' << v << '\n';
  }
  {
    auto out = open_output("features.csv");
    std::string line;
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
      line.clear();
      for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
        if (j > 0) line += ',';
        line += format_real(ds.features(i, j));
      }
      out << line << '\n';
    }
  }
  {
    auto out = open_output("labels.txt");
    for (int label : ds.labels) out << label << '\n';
  }
  if (ds.splits) {
    json splits = {{"train", ids_from_mask(ds.splits->train)},
                   {"val", ids_from_mask(ds.splits->val)},
                   {"test", ids_from_mask(ds.splits->test)}};
    auto out = open_output("splits.json");
    out << splits.dump() << '\n';
  }
}

GraphDataset make_split(const GraphDataset& ds, const SplitSpec& spec, Rng& rng) {
  GraphDataset out = ds;
  const auto n = static_cast<std::size_t>(ds.n());

  if (spec.kind == SplitSpec::Kind::kFixed) {
    if (!ds.splits) throw DataError("fixed split requested but the dataset carries no splits.json");
    return out;
  }

  Splits s{std::vector<bool>(n, false), std::vector<bool>(n, false), std::vector<bool>(n, false)};
  if (spec.kind == SplitSpec::Kind::kPerClass) {
    if (spec.per_class < 1 || spec.val_size < 0 || spec.test_size < 0) {
      throw ConfigError("per-class split sizes must be positive");
    }
    for (int c = 0; c < ds.num_classes; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (ds.labels[i] == c) members.push_back(i);
      }
      if (members.size() < static_cast<std::size_t>(spec.per_class)) {
        throw DataError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                        " labeled nodes, fewer than " + std::to_string(spec.per_class));
      }
      for (auto k : rng.sample_without_replacement(members.size(), static_cast<std::size_t>(spec.per_class))) {
        s.train[members[k]] = true;
      }
    }
    std::vector<std::size_t> rest;
    for (auto i : labeled_nodes(ds)) {
      if (!s.train[i]) rest.push_back(i);
    }
    const auto need = static_cast<std::size_t>(spec.val_size) + static_cast<std::size_t>(spec.test_size);
    if (rest.size() < need) {
      throw DataError("only " + std::to_string(rest.size()) + " labeled nodes left for val+test, need " +
                      std::to_string(need));
    }
    rng.shuffle(rest);
    for (std::size_t k = 0; k < need; ++k) {
      (k < static_cast<std::size_t>(spec.val_size) ? s.val : s.test)[rest[k]] = true;
    }
  } else {
    const double total = spec.train_fraction + spec.val_fraction + spec.test_fraction;
    if (spec.train_fraction < 0 || spec.val_fraction < 0 || spec.test_fraction < 0 || total > 1.0 + 1e-9) {
      throw ConfigError("split fractions must be non-negative and sum to at most 1");
    }
    std::vector<std::size_t> nodes = labeled_nodes(ds);
    rng.shuffle(nodes);
    const double m = static_cast<double>(nodes.size());
    const auto cut = [m](double f) { return static_cast<std::size_t>(std::floor(f * m + 1e-9)); };
    const std::size_t n_train = cut(spec.train_fraction);
    const std::size_t n_val = cut(spec.val_fraction);
    const std::size_t n_test = std::min(cut(spec.test_fraction), nodes.size() - n_train - n_val);
    for (std::size_t k = 0; k < n_train + n_val + n_test; ++k) {
      (k < n_train ? s.train : k < n_train + n_val ? s.val : s.test)[nodes[k]] = true;
    }
  }
  out.splits = std::move(s);
  return out;
}

GraphDataset mask_features(const GraphDataset& ds, double missing_rate, bool protect_train, Rng& rng) {
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) {
    throw ConfigError("missing rate must lie in [0, 1], got " + std::to_string(missing_rate));
  }
  if (!ds.splits) throw ConfigError("mask_features needs split masks to be assigned first");
  GraphDataset out = ds;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < static_cast<std::size_t>(ds.n()); ++i) {
    if (!protect_train || !ds.splits->train[i]) eligible.push_back(i);
  }
  const auto count = static_cast<std::size_t>(std::llround(missing_rate * static_cast<double>(eligible.size())));
  for (auto k : rng.sample_without_replacement(eligible.size(), count)) {
    out.features.row(static_cast<Eigen::Index>(eligible[k])).setZero();
  }
  return out;
}

GraphDataset generate_sbm(const SbmParams& params, Rng& rng) {
  if (params.blocks < 1) throw ConfigError("sbm: need at least one block");
  if (params.nodes_per_block < 1) throw ConfigError("sbm: blocks must contain at least one node");
  if (!(params.p_out >= 0.0 && params.p_out < params.p_in && params.p_in <= 1.0)) {
    throw ConfigError("sbm: need 0 <= p_out < p_in <= 1");
  }
  if (params.feature_dim < params.blocks) throw ConfigError("sbm: feature_dim must be >= blocks");
  if (params.feature_noise < 0.0) throw ConfigError("sbm: feature_noise must be non-negative");

  const std::int64_t n = static_cast<std::int64_t>(params.blocks) * params.nodes_per_block;
  GraphDataset ds;
  ds.name = "sbm";
  ds.num_classes = params.blocks;
  ds.labels.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i / params.nodes_per_block);

  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double p = ds.labels[i] == ds.labels[j] ? params.p_in : params.p_out;
      if (rng.bernoulli(p)) ds.edges.emplace_back(i, j);
    }
  }

  ds.features = Matrix::Zero(n, params.feature_dim);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < params.feature_dim; ++j) {
      ds.features(i, j) = (j == ds.labels[i] ? 1.0 : 0.0) + params.feature_noise * rng.normal();
    }
  }
  return ds;
}

}  // namespace nodenorm
