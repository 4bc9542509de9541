#pragma once

#include "json.hpp"
#include "pjfnn/data.hpp"
#include "pjfnn/embeddings.hpp"
#include "pjfnn/eval.hpp"
#include "pjfnn/model.hpp"
#include "pjfnn/synth.hpp"
#include "pjfnn/training.hpp"

namespace pjfnn {

// JSON views of the configuration structs. `*_from_json` overlays the keys
// present in `j` onto `out`, so partial objects keep the remaining defaults.
// Unknown keys and ill-typed values raise ConfigError.

/// The shortest decimal that reads back as `value`, so 0.025f prints as 0.025.
nlohmann::json float_json(float value);

nlohmann::json config_to_json(const TowerConfig& c);
nlohmann::json config_to_json(const ModelConfig& c);
nlohmann::json config_to_json(const TrainConfig& c);
nlohmann::json config_to_json(const SkipGramConfig& c);
nlohmann::json config_to_json(const SplitConfig& c);
nlohmann::json config_to_json(const SynthConfig& c);
nlohmann::json config_to_json(const BaselineConfig& c);

void config_from_json(const nlohmann::json& j, TowerConfig& out);
void config_from_json(const nlohmann::json& j, ModelConfig& out);
void config_from_json(const nlohmann::json& j, TrainConfig& out);
void config_from_json(const nlohmann::json& j, SkipGramConfig& out);
void config_from_json(const nlohmann::json& j, SplitConfig& out);
void config_from_json(const nlohmann::json& j, SynthConfig& out);
void config_from_json(const nlohmann::json& j, BaselineConfig& out);

}  // namespace pjfnn
