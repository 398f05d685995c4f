#include "hyqal/augment.hpp"

#include <algorithm>
#include <cmath>

#include "hyqal/layers.hpp" // warn()
#include "json.hpp"

namespace hyqal::ssl {

void AugmentationConfig::validate() const {
    if (rotation_degrees < 0.0 || rotation_degrees > 180.0) {
        throw DataError("augment: rotation range must be in [0,180] degrees");
    }
    if (!(crop_ratio_min > 0.0 && crop_ratio_min <= crop_ratio_max && crop_ratio_max <= 1.0)) {
        throw DataError("augment: crop ratio range must satisfy 0 < min <= max <= 1");
    }
    if (translate_fraction < 0.0 || translate_fraction > 0.5) {
        throw DataError("augment: translate fraction must be in [0,0.5]");
    }
    if (intensity_scale_min <= 0.0 || intensity_scale_min > intensity_scale_max) {
        throw DataError("augment: intensity scale range must satisfy 0 < min <= max");
    }
    for (double p : {prob_rotate, prob_crop, prob_translate, prob_intensity}) {
        if (p < 0.0 || p > 1.0) {
            throw DataError("augment: application probabilities must be in [0,1]");
        }
    }
}

AugmentParams sample_augment_params(const AugmentationConfig& cfg, Rng& rng) {
    AugmentParams p;
    if (rng.bernoulli(cfg.prob_rotate)) {
        p.rotate_degrees = rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees);
    }
    if (rng.bernoulli(cfg.prob_crop)) {
        const double ratio = rng.uniform(cfg.crop_ratio_min, cfg.crop_ratio_max);
        p.crop = {ratio, 0.0};
        p.crop_off_y = rng.uniform();
        p.crop_off_x = rng.uniform();
    }
    if (rng.bernoulli(cfg.prob_translate)) {
        p.translate = {rng.uniform(-cfg.translate_fraction, cfg.translate_fraction),
                       rng.uniform(-cfg.translate_fraction, cfg.translate_fraction)};
    }
    if (rng.bernoulli(cfg.prob_intensity)) {
        p.intensity = {rng.uniform(cfg.intensity_scale_min, cfg.intensity_scale_max),
                       rng.uniform(-cfg.intensity_shift, cfg.intensity_shift)};
    }
    return p;
}

std::string AugmentParams::to_json() const {
    nlohmann::json j;
    if (rotate_degrees) j["rotate_degrees"] = *rotate_degrees;
    if (crop) {
        j["crop_ratio"] = crop->first;
        j["crop_off_y"] = crop_off_y;
        j["crop_off_x"] = crop_off_x;
    }
    if (translate) {
        j["translate_y"] = translate->first;
        j["translate_x"] = translate->second;
    }
    if (intensity) {
        j["intensity_scale"] = intensity->first;
        j["intensity_shift"] = intensity->second;
    }
    return j.dump();
}

namespace {

double bilinear(const Tensor& img, double y, double x) {
    const auto h = static_cast<std::ptrdiff_t>(img.dim(0));
    const auto w = static_cast<std::ptrdiff_t>(img.dim(1));
    const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(y));
    const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(x));
    const double fy = y - static_cast<double>(y0);
    const double fx = x - static_cast<double>(x0);
    auto pix = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
            return 0.0; // zero padding outside the frame
        }
        return img.data()[yy * w + xx];
    };
    return (1.0 - fy) * ((1.0 - fx) * pix(y0, x0) + fx * pix(y0, x0 + 1)) +
           fy * ((1.0 - fx) * pix(y0 + 1, x0) + fx * pix(y0 + 1, x0 + 1));
}

Tensor rotate(const Tensor& img, double degrees) {
    const std::size_t h = img.dim(0), w = img.dim(1);
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double rad = degrees * M_PI / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    Tensor out({h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            out.at(y, x) = bilinear(img, cy + c * dy + s * dx, cx - s * dy + c * dx);
        }
    }
    return out;
}

Tensor crop_resize(const Tensor& img, double ratio, double off_y, double off_x) {
    const std::size_t h = img.dim(0), w = img.dim(1);
    const double ch = ratio * static_cast<double>(h);
    const double cw = ratio * static_cast<double>(w);
    const double oy = off_y * (static_cast<double>(h) - ch);
    const double ox = off_x * (static_cast<double>(w) - cw);
    Tensor out({h, w});
    const double sy = (ch - 1.0) / (static_cast<double>(h) - 1.0);
    const double sx = (cw - 1.0) / (static_cast<double>(w) - 1.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            out.at(y, x) = bilinear(img, oy + static_cast<double>(y) * sy,
                                    ox + static_cast<double>(x) * sx);
        }
    }
    return out;
}

Tensor translate(const Tensor& img, double dy, double dx) {
    const std::size_t h = img.dim(0), w = img.dim(1);
    Tensor out({h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            out.at(y, x) = bilinear(img, static_cast<double>(y) - dy,
                                    static_cast<double>(x) - dx);
        }
    }
    return out;
}

} // namespace

Tensor apply_augment(const Tensor& image, const AugmentParams& params) {
    if (image.rank() != 2) {
        throw ShapeError("augment: expected [H,W] image, got " + image.shape_str());
    }
    Tensor out = image;
    if (params.rotate_degrees) {
        out = rotate(out, *params.rotate_degrees);
    }
    if (params.crop && params.crop->first < 1.0) {
        out = crop_resize(out, params.crop->first, params.crop_off_y, params.crop_off_x);
    }
    if (params.translate) {
        const std::size_t h = image.dim(0), w = image.dim(1);
        out = translate(out, params.translate->first * static_cast<double>(h),
                        params.translate->second * static_cast<double>(w));
    }
    if (params.intensity) {
        for (double& v : out.values()) {
            v = v * params.intensity->first + params.intensity->second;
        }
    }
    for (double& v : out.values()) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

ViewPair make_views(const Tensor& image, const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    double lo = 1.0, hi = 0.0;
    for (double v : image.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo < 0.0 || hi > 1.0) {
        throw DataError("make_views: image values must lie in [0,1]");
    }
    if (lo == hi) {
        warn("make_views: constant image (degenerate input)");
    }
    ViewPair vp;
    vp.params1 = sample_augment_params(cfg, rng);
    vp.params2 = sample_augment_params(cfg, rng);
    vp.view1 = apply_augment(image, vp.params1);
    vp.view2 = apply_augment(image, vp.params2);
    return vp;
}

} // namespace hyqal::ssl
