#pragma once

// JSON forms of the model and training configuration (checkpoint headers
// and --config files).

#include <nlohmann/json.hpp>

#include "blobgan/model.hpp"

namespace blobgan::io {

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

// Keys absent from `j` keep the values already in `cfg`. Throws FormatError
// (section "config") on type errors or unknown keys.
void merge_json(const nlohmann::json& j, ModelConfig& cfg);
void merge_json(const nlohmann::json& j, TrainConfig& cfg);

}  // namespace blobgan::io
