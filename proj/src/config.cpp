#include <nodenorm/experiment.hpp>

#include <fstream>
#include <set>

#include "internal.hpp"

namespace nodenorm {

namespace {

void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("'" + where + "." + key + "' has the wrong type");
  }
}

SbmParams sbm_from_json(const Json& j, std::uint64_t& seed) {
  reject_unknown(j, {"blocks", "nodes_per_block", "p_in", "p_out", "feature_dim", "feature_noise", "seed"},
                 "dataset.sbm");
  SbmParams p;
  read(j, "blocks", p.blocks, "dataset.sbm");
  read(j, "nodes_per_block", p.nodes_per_block, "dataset.sbm");
  read(j, "p_in", p.p_in, "dataset.sbm");
  read(j, "p_out", p.p_out, "dataset.sbm");
  read(j, "feature_dim", p.feature_dim, "dataset.sbm");
  read(j, "feature_noise", p.feature_noise, "dataset.sbm");
  read(j, "seed", seed, "dataset.sbm");
  return p;
}

}  // namespace

void apply_train_fields(const Json& j, TrainParams& train, const std::string& where) {
  reject_unknown(j, {"lr", "weight_decay", "l1_weight", "dropout", "epochs"}, where);
  read(j, "lr", train.lr, where);
  read(j, "weight_decay", train.weight_decay, where);
  read(j, "l1_weight", train.l1_weight, where);
  read(j, "dropout", train.dropout, where);
  read(j, "epochs", train.epochs, where);
}

void RunConfig::validate() const {
  if (dataset.bundle.has_value() == dataset.sbm.has_value()) {
    throw ConfigError("dataset must name exactly one of 'bundle' or 'sbm'");
  }
  if (train.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(train.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (train.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (train.l1_weight < 0.0) throw ConfigError("l1 weight must be non-negative");
  if (!(train.dropout >= 0.0 && train.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw ConfigError("missing_rate must lie in [0, 1]");
  if (model.depth < 2) throw ConfigError("model depth must be >= 2");
  if (model.hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (!presets.is_object()) throw ConfigError("'presets' must be an object");
}

RunConfig config_from_json(const Json& j) {
  reject_unknown(j, {"dataset", "split", "missing_rate", "protect_train", "model", "train", "seed", "diagnostics",
                     "presets"},
                 "config");
  RunConfig c;

  if (!j.contains("dataset")) throw ConfigError("config needs a 'dataset' section");
  const Json& ds = j.at("dataset");
  reject_unknown(ds, {"bundle", "sbm"}, "dataset");
  if (ds.contains("bundle")) {
    if (!ds.at("bundle").is_string()) throw ConfigError("'dataset.bundle' must be a path string");
    c.dataset.bundle = ds.at("bundle").get<std::string>();
  }
  if (ds.contains("sbm")) c.dataset.sbm = sbm_from_json(ds.at("sbm"), c.dataset.sbm_seed);

  if (j.contains("split")) {
    const Json& s = j.at("split");
    reject_unknown(s, {"kind", "per_class", "val_size", "test_size", "train", "val", "test"}, "split");
    std::string kind = "per_class";
    read(s, "kind", kind, "split");
    if (kind == "per_class") {
      c.split.kind = SplitSpec::Kind::kPerClass;
    } else if (kind == "fraction") {
      c.split.kind = SplitSpec::Kind::kFraction;
    } else if (kind == "fixed") {
      c.split.kind = SplitSpec::Kind::kFixed;
    } else {
      throw ConfigError("unknown split kind '" + kind + "'");
    }
    read(s, "per_class", c.split.per_class, "split");
    read(s, "val_size", c.split.val_size, "split");
    read(s, "test_size", c.split.test_size, "split");
    read(s, "train", c.split.train_fraction, "split");
    read(s, "val", c.split.val_fraction, "split");
    read(s, "test", c.split.test_fraction, "split");
  }

  read(j, "missing_rate", c.missing_rate, "config");
  read(j, "protect_train", c.protect_train, "config");
  read(j, "seed", c.seed, "config");

  if (j.contains("model")) {
    const Json& m = j.at("model");
    reject_unknown(m, {"depth", "hidden_dim", "architecture", "norm", "placement", "residual"}, "model");
    read(m, "depth", c.model.depth, "model");
    read(m, "hidden_dim", c.model.hidden_dim, "model");
    read(m, "residual", c.model.residual, "model");
    std::string text;
    if (m.contains("architecture")) {
      read(m, "architecture", text, "model");
      c.model.architecture = parse_architecture(text);
    }
    if (m.contains("norm")) {
      read(m, "norm", text, "model");
      c.model.norm = NormKind::parse(text);
    }
    if (m.contains("placement")) {
      read(m, "placement", text, "model");
      c.model.placement = parse_placement(text);
    }
  }

  if (j.contains("train")) apply_train_fields(j.at("train"), c.train, "train");
  c.model.dropout_rate = c.train.dropout;

  if (j.contains("diagnostics")) {
    const Json& d = j.at("diagnostics");
    reject_unknown(d, {"variance_profile", "lipschitz", "correlation", "bins", "lipschitz_pair_limit"},
                   "diagnostics");
    read(d, "variance_profile", c.diagnostics.variance_profile, "diagnostics");
    read(d, "lipschitz", c.diagnostics.lipschitz, "diagnostics");
    read(d, "correlation", c.diagnostics.correlation, "diagnostics");
    read(d, "bins", c.diagnostics.bins, "diagnostics");
    read(d, "lipschitz_pair_limit", c.diagnostics.lipschitz_pair_limit, "diagnostics");
  }

  if (j.contains("presets")) {
    c.presets = j.at("presets");
    if (!c.presets.is_object()) throw ConfigError("'presets' must be an object");
    for (const auto& [variant, by_depth] : c.presets.items()) {
      if (!by_depth.is_object()) throw ConfigError("presets." + variant + " must be an object");
      for (const auto& [depth, fields] : by_depth.items()) {
        TrainParams scratch;
        apply_train_fields(fields, scratch, "presets." + variant + "." + depth);
      }
    }
  }

  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  if (c.dataset.bundle) j["dataset"]["bundle"] = c.dataset.bundle->string();
  if (c.dataset.sbm) {
    const SbmParams& p = *c.dataset.sbm;
    j["dataset"]["sbm"] = {{"blocks", p.blocks},           {"nodes_per_block", p.nodes_per_block},
                           {"p_in", p.p_in},               {"p_out", p.p_out},
                           {"feature_dim", p.feature_dim}, {"feature_noise", p.feature_noise},
                           {"seed", c.dataset.sbm_seed}};
  }
  switch (c.split.kind) {
    case SplitSpec::Kind::kPerClass:
      j["split"] = {{"kind", "per_class"},
                    {"per_class", c.split.per_class},
                    {"val_size", c.split.val_size},
                    {"test_size", c.split.test_size}};
      break;
    case SplitSpec::Kind::kFraction:
      j["split"] = {{"kind", "fraction"},
                    {"train", c.split.train_fraction},
                    {"val", c.split.val_fraction},
                    {"test", c.split.test_fraction}};
      break;
    case SplitSpec::Kind::kFixed:
      j["split"] = {{"kind", "fixed"}};
      break;
  }
  j["missing_rate"] = c.missing_rate;
  j["protect_train"] = c.protect_train;
  j["model"] = {{"depth", c.model.depth},
                {"hidden_dim", c.model.hidden_dim},
                {"architecture", to_string(c.model.architecture)},
                {"norm", c.model.norm.name()},
                {"placement", to_string(c.model.placement)},
                {"residual", c.model.residual}};
  j["train"] = {{"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"l1_weight", c.train.l1_weight},
                {"dropout", c.train.dropout},
                {"epochs", c.train.epochs}};
  j["seed"] = c.seed;
  j["diagnostics"] = {{"variance_profile", c.diagnostics.variance_profile},
                      {"lipschitz", c.diagnostics.lipschitz},
                      {"correlation", c.diagnostics.correlation},
                      {"bins", c.diagnostics.bins},
                      {"lipschitz_pair_limit", c.diagnostics.lipschitz_pair_limit}};
  if (!c.presets.empty()) j["presets"] = c.presets;
  return j;
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + assignment + "' descends into a non-object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

Json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

std::string variant_name(Architecture arch, NormKind norm) {
  if (!norm.active()) return to_string(arch);
  if (arch == Architecture::kGCN) return norm.name();
  return to_string(arch) + "+" + norm.name();
}

std::pair<Architecture, NormKind> parse_variant(const std::string& name) {
  const auto plus = name.find('+');
  if (plus != std::string::npos) {
    return {parse_architecture(name.substr(0, plus)), NormKind::parse(name.substr(plus + 1))};
  }
  if (name == "gcn" || name == "tgcn" || name == "pgcn") return {parse_architecture(name), NormKind::none()};
  return {Architecture::kGCN, NormKind::parse(name)};
}

}  // namespace nodenorm
