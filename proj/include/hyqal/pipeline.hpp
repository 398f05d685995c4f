#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hyqal/checkpoint.hpp"
#include "hyqal/config.hpp"
#include "hyqal/dataset.hpp"
#include "hyqal/hybrid.hpp"
#include "hyqal/metrics.hpp"
#include "json.hpp"

namespace hyqal::pipeline {

// Single-line JSON progress event on stderr (machine-tailable).
void progress(const nlohmann::json& event);

struct DataBundle {
    data::Dataset dataset;
    data::SplitManifest manifest;
};

// Synthetic data generated from the config, split at the patient level.
DataBundle prepare_synthetic_data(const ExperimentConfig& cfg);

// Directory produced by gen-data (or hand-assembled): PGM files plus
// manifest.json.
DataBundle load_data_dir(const std::string& dir);

// |train_labeled| <= bound * |train_unlabeled| when both splits exist.
void check_labeled_ratio(const ExperimentConfig& cfg, const data::SplitManifest& manifest);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double val_auc = 0.0;
    bool val_auc_defined = false;
};

struct RunRecord {
    std::string name;
    std::string variant;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::size_t parameter_count = 0;
    std::vector<double> pretrain_losses;
    std::vector<EpochRecord> finetune_epochs;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
    eval::MetricsReport test_metrics;
    // Reported via progress events only; kept out of the serialized record so
    // identical (config, seed) reruns emit byte-identical files.
    double wall_seconds = 0.0;

    nlohmann::json to_json() const;
};

struct PretrainResult {
    std::vector<double> epoch_losses;
    nlohmann::json checkpoint;
};

// Self-supervised stage over the label-stripped unlabeled split.
PretrainResult pretrain(const ExperimentConfig& cfg, const DataBundle& data,
                        std::uint64_t run_seed);

struct VariantSpec {
    std::string name;
    bool use_ssl = false;
    bool quantum = false;
    bool simple_encoder = false;
    hybrid::FreezePolicy freeze = hybrid::FreezePolicy::last_block;
};

// Named experiment arms. Supervised-from-scratch arms train fully unfrozen
// (there is nothing pretrained to preserve); SSL arms follow the configured
// policy.
VariantSpec variant_spec(const std::string& name, const ExperimentConfig& cfg);

hybrid::ModelConfig resolve_model_config(const ExperimentConfig& cfg, const VariantSpec& variant);

struct FinetuneResult {
    RunRecord record;
    std::unique_ptr<hybrid::HybridModel> model;
};

// Supervised stage on the labeled split; best-validation-accuracy weights
// (AUC tiebreak, then earlier epoch) are restored before test evaluation.
FinetuneResult finetune(const ExperimentConfig& cfg, const DataBundle& data,
                        std::uint64_t run_seed, const VariantSpec& variant,
                        const nlohmann::json* pretrained_checkpoint,
                        const std::vector<double>& pretrain_losses = {});

struct MatrixResult {
    std::vector<RunRecord> records;
    std::vector<eval::MetricsReport> reports;
};

// Runs every configured variant over every configured seed on shared splits.
// One pretraining pass per seed feeds all SSL arms.
MatrixResult run_matrix(const ExperimentConfig& cfg, const DataBundle& data);

// Positive-class probabilities in sample order (eval mode, chunked).
std::vector<double> positive_scores(hybrid::HybridModel& model,
                                    const std::vector<data::Sample>& samples);

} // namespace hyqal::pipeline
