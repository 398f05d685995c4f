#pragma once

#include <optional>
#include <utility>

#include "hyqal/rng.hpp"
#include "hyqal/tensor.hpp"

namespace hyqal::ssl {

// Stochastic augmentation family for grayscale medical-style images. Ranges
// are deliberately mild: aggressive perturbation can destroy the local
// structure the task depends on.
struct AugmentationConfig {
    double rotation_degrees = 15.0;   // sampled in [-r, +r]
    double crop_ratio_min = 0.8;      // crop side fraction, resized back
    double crop_ratio_max = 1.0;
    double translate_fraction = 0.1;  // max |shift| as fraction of side
    double intensity_scale_min = 0.9;
    double intensity_scale_max = 1.1;
    double intensity_shift = 0.05;    // sampled in [-s, +s]
    double prob_rotate = 0.5;
    double prob_crop = 0.5;
    double prob_translate = 0.5;
    double prob_intensity = 0.8;

    void validate() const;
};

// One sampled parameter set; fully determines the transform (reproducible,
// serializable for logging).
struct AugmentParams {
    std::optional<double> rotate_degrees;
    std::optional<std::pair<double, double>> crop; // (ratio, corner fraction along both axes packed below)
    double crop_off_y = 0.0;                       // corner offsets as fractions of slack
    double crop_off_x = 0.0;
    std::optional<std::pair<double, double>> translate; // (dy, dx) in pixels
    std::optional<std::pair<double, double>> intensity; // (scale, shift)

    std::string to_json() const;
};

AugmentParams sample_augment_params(const AugmentationConfig& cfg, Rng& rng);

// Applies the sampled transform to an [H,W] image with values in [0,1].
// Bilinear interpolation, zero padding outside the frame, output clipped to
// [0,1]. Dimensions never change.
Tensor apply_augment(const Tensor& image, const AugmentParams& params);

struct ViewPair {
    Tensor view1, view2;
    AugmentParams params1, params2;
};

// Two independently sampled views of the same image (the positive pair).
ViewPair make_views(const Tensor& image, const AugmentationConfig& cfg, Rng& rng);

} // namespace hyqal::ssl
