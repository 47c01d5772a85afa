#pragma once

// JSON conversion helpers shared by the model and quantized-model file formats.

#include "json.hpp"

#include "gnnqec/model.hpp"

namespace gnnqec::model::detail {

using ojson = nlohmann::ordered_json;

ojson config_to_json(const ModelConfig& config);
ojson weights_to_json(const ModelConfig& config, const WeightSet& weights);
ojson model_to_ojson(const Model& model);

// Each throws MalformedFileError / UnknownLayerKindError / InvalidConfigError /
// ShapeMismatchError depending on what is wrong.
ModelConfig config_from_json(const nlohmann::json& j);
WeightSet weights_from_json(const ModelConfig& config, const nlohmann::json& j);
Model model_from_parsed(const nlohmann::json& j);

nlohmann::json parse_json(std::string_view text, const std::string& what);

}  // namespace gnnqec::model::detail
