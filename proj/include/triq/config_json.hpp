#pragma once

#include <nlohmann/json.hpp>

#include "triq/model.hpp"
#include "triq/trainer.hpp"

namespace triq {

// JSON forms used in checkpoint headers. Readers reject unknown keys.
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace triq
