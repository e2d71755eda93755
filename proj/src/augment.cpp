#include <algorithm>
#include <array>
#include <cmath>

#include "solarscan/augment.hpp"
#include "solarscan/errors.hpp"

namespace solarscan {

namespace {

struct Hsv {
    float h;  // [0,1) turns
    float s;
    float v;
};

Hsv rgb_to_hsv(float r, float g, float b) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    Hsv out{0.0f, 0.0f, mx};
    if (d > 0.0f) {
        if (mx == r) {
            out.h = (g - b) / d;
        } else if (mx == g) {
            out.h = 2.0f + (b - r) / d;
        } else {
            out.h = 4.0f + (r - g) / d;
        }
        out.h /= 6.0f;
        if (out.h < 0.0f) out.h += 1.0f;
        out.s = mx > 0.0f ? d / mx : 0.0f;
    }
    return out;
}

void hsv_to_rgb(const Hsv& hsv, float& r, float& g, float& b) {
    const float h6 = hsv.h * 6.0f;
    const int sector = static_cast<int>(std::floor(h6)) % 6;
    const float f = h6 - std::floor(h6);
    const float p = hsv.v * (1.0f - hsv.s);
    const float q = hsv.v * (1.0f - hsv.s * f);
    const float t = hsv.v * (1.0f - hsv.s * (1.0f - f));
    switch (sector) {
        case 0: r = hsv.v; g = t; b = p; break;
        case 1: r = q; g = hsv.v; b = p; break;
        case 2: r = p; g = hsv.v; b = t; break;
        case 3: r = p; g = q; b = hsv.v; break;
        case 4: r = t; g = p; b = hsv.v; break;
        default: r = hsv.v; g = p; b = q; break;
    }
}

float gray_of(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

void clamp01(RgbImage& img) {
    for (float& v : img.data) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
}

void apply_brightness(RgbImage& img, float factor) {
    for (float& v : img.data) {
        v = std::clamp(v * factor, 0.0f, 1.0f);
    }
}

void apply_contrast(RgbImage& img, float factor) {
    double sum = 0.0;
    const std::vector<float> gray = to_grayscale(img);
    for (float v : gray) sum += v;
    const float mean = static_cast<float>(sum / gray.size());
    for (float& v : img.data) {
        v = std::clamp(mean + factor * (v - mean), 0.0f, 1.0f);
    }
}

void apply_saturation(RgbImage& img, float factor) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float g = gray_of(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = std::clamp(g + factor * (img.at(y, x, c) - g), 0.0f, 1.0f);
            }
        }
    }
}

void apply_hue(RgbImage& img, float shift_turns) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            Hsv hsv = rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
            hsv.h += shift_turns;
            hsv.h -= std::floor(hsv.h);
            hsv_to_rgb(hsv, img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
        }
    }
}

}  // namespace

AugmentationConfig AugmentationConfig::disabled(int output_size) {
    AugmentationConfig cfg;
    cfg.crop_scale_min = cfg.crop_scale_max = 1.0;
    cfg.crop_aspect_min = cfg.crop_aspect_max = 1.0;
    cfg.hflip_prob = cfg.vflip_prob = 0.0;
    cfg.rotation_max_deg = 0.0;
    cfg.jitter_brightness = cfg.jitter_contrast = 0.0;
    cfg.jitter_saturation = cfg.jitter_hue = 0.0;
    cfg.output_size = output_size;
    return cfg;
}

void AugmentationConfig::validate() const {
    if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0)) {
        throw ArgumentError("crop scale range must satisfy 0 < min <= max <= 1");
    }
    if (!(crop_aspect_min > 0.0 && crop_aspect_min <= crop_aspect_max)) {
        throw ArgumentError("crop aspect range invalid");
    }
    if (hflip_prob < 0.0 || hflip_prob > 1.0 || vflip_prob < 0.0 || vflip_prob > 1.0) {
        throw ArgumentError("flip probabilities must be in [0,1]");
    }
    if (rotation_max_deg < 0.0) {
        throw ArgumentError("rotation_max_deg must be >= 0");
    }
    if (jitter_brightness < 0.0 || jitter_contrast < 0.0 || jitter_saturation < 0.0 ||
        jitter_hue < 0.0 || jitter_hue > 0.5) {
        throw ArgumentError("jitter magnitudes must be >= 0 (hue <= 0.5)");
    }
    if (output_size < 1) {
        throw ArgumentError("output_size must be positive");
    }
}

RgbImage random_resized_crop(const RgbImage& img, const AugmentationConfig& cfg, Rng& rng) {
    if (img.width < 2 || img.height < 2) {
        throw ArgumentError("random_resized_crop needs at least a 2x2 image");
    }
    const double area = static_cast<double>(img.width) * img.height;
    int cw = -1, ch = -1;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
        const double ratio = std::exp(
            rng.uniform(std::log(cfg.crop_aspect_min), std::log(cfg.crop_aspect_max)));
        const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
        const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
        if (w >= 1 && h >= 1 && w <= img.width && h <= img.height) {
            cw = w;
            ch = h;
            break;
        }
    }
    int x0, y0;
    if (cw < 0) {
        // center crop at the nearest in-range aspect
        const double in_ratio = static_cast<double>(img.width) / img.height;
        if (in_ratio < cfg.crop_aspect_min) {
            cw = img.width;
            ch = static_cast<int>(std::lround(cw / cfg.crop_aspect_min));
        } else if (in_ratio > cfg.crop_aspect_max) {
            ch = img.height;
            cw = static_cast<int>(std::lround(ch * cfg.crop_aspect_max));
        } else {
            cw = img.width;
            ch = img.height;
        }
        cw = std::clamp(cw, 1, img.width);
        ch = std::clamp(ch, 1, img.height);
        x0 = (img.width - cw) / 2;
        y0 = (img.height - ch) / 2;
    } else {
        x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - cw + 1)));
        y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - ch + 1)));
    }
    return resize_bilinear(crop(img, x0, y0, cw, ch), cfg.output_size, cfg.output_size);
}

RgbImage random_flip(const RgbImage& img, bool horizontal, double prob, Rng& rng) {
    if (prob < 0.0 || prob > 1.0) {
        throw ArgumentError("flip probability must be in [0,1]");
    }
    if (!rng.bernoulli(prob)) {
        return img;
    }
    return horizontal ? flip_horizontal(img) : flip_vertical(img);
}

RgbImage random_rotation(const RgbImage& img, double max_deg, Rng& rng) {
    if (max_deg < 0.0) {
        throw ArgumentError("rotation_max_deg must be >= 0");
    }
    if (max_deg == 0.0) {
        return img;
    }
    return rotate_image(img, rng.uniform(-max_deg, max_deg));
}

RgbImage color_jitter(const RgbImage& img, const AugmentationConfig& cfg, Rng& rng) {
    // Factors are drawn first, then the op order is shuffled; the draw order
    // is part of the determinism contract.
    const float bf = static_cast<float>(
        rng.uniform(std::max(0.0, 1.0 - cfg.jitter_brightness), 1.0 + cfg.jitter_brightness));
    const float cf = static_cast<float>(
        rng.uniform(std::max(0.0, 1.0 - cfg.jitter_contrast), 1.0 + cfg.jitter_contrast));
    const float sf = static_cast<float>(
        rng.uniform(std::max(0.0, 1.0 - cfg.jitter_saturation), 1.0 + cfg.jitter_saturation));
    const float hf = static_cast<float>(rng.uniform(-cfg.jitter_hue, cfg.jitter_hue));

    std::vector<int> order = {0, 1, 2, 3};
    rng.shuffle(order);

    RgbImage out = img;
    for (int op : order) {
        switch (op) {
            case 0:
                if (cfg.jitter_brightness > 0.0) apply_brightness(out, bf);
                break;
            case 1:
                if (cfg.jitter_contrast > 0.0) apply_contrast(out, cf);
                break;
            case 2:
                if (cfg.jitter_saturation > 0.0) apply_saturation(out, sf);
                break;
            default:
                if (cfg.jitter_hue > 0.0) apply_hue(out, hf);
                break;
        }
    }
    clamp01(out);
    return out;
}

RgbImage augment(const RgbImage& img, const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    RgbImage out = random_resized_crop(img, cfg, rng);
    out = random_flip(out, true, cfg.hflip_prob, rng);
    out = random_flip(out, false, cfg.vflip_prob, rng);
    out = random_rotation(out, cfg.rotation_max_deg, rng);
    out = color_jitter(out, cfg, rng);
    return out;
}

}  // namespace solarscan
