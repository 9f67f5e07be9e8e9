#pragma once

// JSON forms of the configuration structs. The canonical dump (sorted keys,
// shortest round-trip doubles) is what config hashes are computed over.

#include <string>

#include "json.hpp"

#include "disent/dataset.hpp"
#include "disent/metrics.hpp"
#include "disent/regularizers.hpp"
#include "disent/training.hpp"
#include "disent/vae.hpp"

namespace disent {

void to_json(nlohmann::json& j, const FactorSpace& v);
void from_json(const nlohmann::json& j, FactorSpace& v);
void to_json(nlohmann::json& j, const DatasetSpec& v);
void from_json(const nlohmann::json& j, DatasetSpec& v);
void to_json(nlohmann::json& j, const ModelConfig& v);
void from_json(const nlohmann::json& j, ModelConfig& v);
void to_json(nlohmann::json& j, const RegularizerConfig& v);
void from_json(const nlohmann::json& j, RegularizerConfig& v);
void to_json(nlohmann::json& j, const DiscriminatorConfig& v);
void from_json(const nlohmann::json& j, DiscriminatorConfig& v);
void to_json(nlohmann::json& j, const TrainConfig& v);
void from_json(const nlohmann::json& j, TrainConfig& v);
void to_json(nlohmann::json& j, const MetricConfig& v);
void from_json(const nlohmann::json& j, MetricConfig& v);
void to_json(nlohmann::json& j, const MetricReport& v);
void from_json(const nlohmann::json& j, MetricReport& v);

/// 64-bit FNV-1a digest of a canonical JSON dump, as 16 hex digits.
std::string stable_digest(const nlohmann::json& value);

}  // namespace disent
