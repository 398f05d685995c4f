#pragma once

#include <cstdint>
#include <string>

#include "hyqal/hybrid.hpp"
#include "json.hpp"

namespace hyqal::pipeline {

inline constexpr int kCheckpointFormatVersion = 1;

// Checkpoints are a single JSON document: format version, config snapshot,
// parameter groups as named flat arrays with shapes, RNG state and the
// training step. Doubles serialize with shortest-roundtrip precision, so a
// save/load cycle is value-exact.
nlohmann::json checkpoint_to_json(hybrid::HybridModel& model, const nlohmann::json& config,
                                  const std::string& config_hash, const std::string& variant,
                                  std::int64_t step);

void save_checkpoint(const std::string& path, hybrid::HybridModel& model,
                     const nlohmann::json& config, const std::string& config_hash,
                     const std::string& variant, std::int64_t step);

nlohmann::json read_checkpoint_file(const std::string& path);

// Restores parameters, batchnorm state and the training RNG into an
// already-constructed model; shapes must match exactly.
void load_checkpoint_into(const nlohmann::json& ckpt, hybrid::HybridModel& model);

// Rebuilds the model from the embedded model_config, then restores weights.
struct LoadedModel {
    hybrid::ModelConfig config;
    std::unique_ptr<hybrid::HybridModel> model;
    nlohmann::json raw;
};
LoadedModel load_model_from_checkpoint(const std::string& path);

hybrid::ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const hybrid::ModelConfig& cfg);

} // namespace hyqal::pipeline
