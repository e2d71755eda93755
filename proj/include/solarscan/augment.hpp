#pragma once

#include "solarscan/image.hpp"
#include "solarscan/rng.hpp"

namespace solarscan {

struct AugmentationConfig {
    double crop_scale_min = 0.7;
    double crop_scale_max = 1.0;
    double crop_aspect_min = 3.0 / 4.0;
    double crop_aspect_max = 4.0 / 3.0;
    double hflip_prob = 0.5;
    double vflip_prob = 0.5;
    double rotation_max_deg = 30.0;
    double jitter_brightness = 0.4;
    double jitter_contrast = 0.4;
    double jitter_saturation = 0.2;
    double jitter_hue = 0.1;
    int output_size = 224;

    // Deterministic evaluation-path variant: plain resize only.
    static AugmentationConfig disabled(int output_size = 224);

    void validate() const;
};

RgbImage random_resized_crop(const RgbImage& img, const AugmentationConfig& cfg, Rng& rng);
RgbImage random_flip(const RgbImage& img, bool horizontal, double prob, Rng& rng);
RgbImage random_rotation(const RgbImage& img, double max_deg, Rng& rng);
RgbImage color_jitter(const RgbImage& img, const AugmentationConfig& cfg, Rng& rng);

// crop -> hflip -> vflip -> rotation -> jitter; output is output_size square.
RgbImage augment(const RgbImage& img, const AugmentationConfig& cfg, Rng& rng);

}  // namespace solarscan
