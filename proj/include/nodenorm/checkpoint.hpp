#pragma once

#include <filesystem>

#include <json.hpp>

#include <nodenorm/model.hpp>

namespace nodenorm {

struct Checkpoint {
  Model model;
  /// Run configuration that produced the model (may be null).
  nlohmann::json config;
};

/// Binary layout: "NODENORM", u64 LE header length, JSON header, then every
/// tensor as row-major little-endian f64 in header order.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace nodenorm
