#pragma once

// JSON round-trips for the run configurations. Used by the checkpoint
// header, the CLI config file, and the effective-config echo. When
// `strict` is set, unknown keys are rejected; missing keys always fall
// back to the documented defaults.

#include <json.hpp>

#include "weno/dataset.hpp"
#include "weno/training.hpp"

namespace weno {

nlohmann::json gen_spec_to_json(const GenSpec& spec);
GenSpec gen_spec_from_json(const nlohmann::json& j, bool strict);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, bool strict);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j, bool strict);

}  // namespace weno
