#pragma once

#include <array>
#include <string>
#include <vector>

#include "solarscan/tensor.hpp"

namespace solarscan {

// Interleaved RGB raster, intensities in [0,1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // height * width * 3, row-major

    RgbImage() = default;
    RgbImage(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

// Decodes a PNG or JPEG file (sniffed by magic bytes) into [0,1] intensities.
RgbImage load_image(const std::string& path);

void save_png(const RgbImage& img, const std::string& path);
void save_jpeg(const RgbImage& img, const std::string& path, int quality = 90);

RgbImage resize_bilinear(const RgbImage& img, int out_w, int out_h);
RgbImage flip_horizontal(const RgbImage& img);
RgbImage flip_vertical(const RgbImage& img);

// Rotation about the image center, bilinear resampling, zero fill outside,
// output dimensions unchanged. Positive angles rotate content counterclockwise.
RgbImage rotate_image(const RgbImage& img, double degrees);

RgbImage crop(const RgbImage& img, int x0, int y0, int w, int h);

// Luma weights 0.299/0.587/0.114, one value per pixel.
std::vector<float> to_grayscale(const RgbImage& img);

// Channel-first (3,H,W) tensor: out[c] = (in[c] - mean[c]) / std[c].
Tensor normalize(const RgbImage& img, const std::array<double, 3>& mean,
                 const std::array<double, 3>& stddev);

inline constexpr std::array<double, 3> kDefaultNormMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kDefaultNormStd = {0.229, 0.224, 0.225};

}  // namespace solarscan
