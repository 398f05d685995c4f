#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyqal/adam.hpp"
#include "hyqal/augment.hpp"
#include "hyqal/dataset.hpp"
#include "hyqal/hybrid.hpp"
#include "json.hpp"

namespace hyqal::pipeline {

struct PretrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    bool include_quantum = false; // quantum module inactive during pretraining by default
    ssl::AugmentationConfig augment;
};

struct FinetuneConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 16;
    hybrid::FreezePolicy freeze = hybrid::FreezePolicy::last_block;
    std::size_t early_stop_patience = 10;
};

struct MatrixConfig {
    std::vector<std::uint64_t> seeds = {42};
    std::vector<std::string> variants = {"ssl_quantum", "ssl_only", "supervised_only",
                                         "supervised_quantum", "simple_baseline"};
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    int threads = 1;
    data::SyntheticConfig synthetic;
    // Relative split weights, applied to patients via largest remainder.
    std::vector<data::SplitRatio> splits = {{"train_unlabeled", 600.0},
                                            {"train_labeled", 100.0},
                                            {"validation", 60.0},
                                            {"test", 120.0}};
    double labeled_ratio_bound = 0.2; // |labeled| <= bound * |unlabeled|
    hybrid::ModelConfig model;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    AdamConfig optimizer;
    MatrixConfig matrix;

    void validate() const;
};

// Parsing is strict about types but tolerant of omitted fields (defaults
// apply). Unknown keys raise UsageError so typos in --set paths surface.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config_file(const std::string& path);

// 16-hex-digit FNV-1a of the canonical serialized form; embedded in every
// output artifact.
std::string config_hash(const ExperimentConfig& cfg);

// Applies `key.path=value` overrides (value parsed as JSON when possible,
// else taken as a string) to a raw config document.
nlohmann::json apply_overrides(nlohmann::json j, const std::vector<std::string>& overrides);

} // namespace hyqal::pipeline
