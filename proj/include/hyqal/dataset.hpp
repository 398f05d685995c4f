#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hyqal/tensor.hpp"

namespace hyqal::data {

struct Sample {
    Tensor image; // [H,W] in [0,1]
    std::optional<int> label; // 0 normal, 1 stenosis; absent for unlabeled
    std::string patient_id;
    std::string sample_id;
};

struct Dataset {
    std::size_t height = 0, width = 0;
    std::vector<Sample> samples;

    const Sample& by_id(const std::string& sample_id) const;
    std::vector<std::string> patient_ids() const; // distinct, first-appearance order
};

struct SyntheticConfig {
    std::size_t count = 880;
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t patients = 44;
    double stenosis_fraction = 0.5;
    double noise_level = 0.05;

    void validate() const;
};

// Each image is a smooth dark vessel-like curve on a bright noisy background;
// positives carry a localized 40-70% width reduction over 10-20% of the curve
// length. Background intensity and vessel thickness are consistent per
// patient, so patient identity is a nuisance factor the classifier must
// ignore. All pixel values are quantized to the 8-bit grid k/255, which makes
// in-memory data identical to a PGM write/read roundtrip.
Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

struct SplitRatio {
    std::string name;
    double fraction;
};

struct SplitManifest {
    std::uint64_t seed = 0;
    std::vector<SplitRatio> ratios;
    // split name -> ids, in dataset order / shuffled-patient order.
    std::map<std::string, std::vector<std::string>> sample_ids;
    std::map<std::string, std::vector<std::string>> patient_ids;

    std::vector<std::string> split_names() const; // ratio order
    std::string to_json() const;
    static SplitManifest from_json(const std::string& text);
};

// Partitions patients (never individual samples) across the named splits.
// Patient counts per split come from largest-remainder rounding of the
// fractions; every split must receive at least one patient.
SplitManifest split_by_patient(const Dataset& dataset, const std::vector<SplitRatio>& ratios,
                               std::uint64_t seed);

// Materializes one split of a manifest, optionally stripping labels (the
// pretraining path must receive provably label-free samples).
std::vector<Sample> select_split(const Dataset& dataset, const SplitManifest& manifest,
                                 const std::string& split, bool strip_labels = false);

// Directory format: <patient_id>_<sample_id>_<label|u>.pgm, parsed from the
// right so patient ids may contain underscores. Files are loaded in sorted
// filename order.
Dataset load_image_dir(const std::string& path);

// Writes every sample as an 8-bit P5 file plus manifest.json. Samples listed
// in the manifest's "train_unlabeled" split are written with the 'u' token.
void write_dataset(const std::string& dir, const Dataset& dataset, const SplitManifest& manifest,
                   const std::string& config_hash);

} // namespace hyqal::data
