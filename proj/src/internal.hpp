#pragma once

#include <string>

#include <nodenorm/experiment.hpp>

namespace nodenorm {

/// Copies the recognised training fields of `j` into `train`.
void apply_train_fields(const Json& j, TrainParams& train, const std::string& where);

}  // namespace nodenorm
