#pragma once

#include <array>
#include <vector>

#include "solarscan/image.hpp"
#include "solarscan/vit.hpp"

namespace solarscan {

// Binary defect region; dimensions match the source image.
struct DefectMask {
    int width = 0;
    int height = 0;
    std::vector<bool> bits;  // row-major, true = defect pixel

    DefectMask() = default;
    DefectMask(int w, int h, bool fill = false)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

    bool at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    void set(int y, int x, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v; }
    std::size_t count() const;
};

struct FeatureVector {
    double normalized_area = 0.0;
    double edge_density = 0.0;
    double color_entropy = 0.0;
    double glcm_contrast = 0.0;
    double glcm_energy = 1.0;
    double glcm_homogeneity = 1.0;
    double glcm_correlation = 0.0;

    std::array<double, 7> as_array() const {
        return {normalized_area, edge_density,     color_entropy,   glcm_contrast,
                glcm_energy,     glcm_homogeneity, glcm_correlation};
    }
};

inline constexpr int kFeatureCount = 7;
inline constexpr double kEdgeMagnitudeThreshold = 0.25;
inline constexpr int kEntropyBins = 32;
inline constexpr int kGlcmLevels = 8;

// Otsu threshold index (0..255) over a 256-bin histogram of grayscale values.
int otsu_threshold(const std::vector<float>& gray);

// Clean predictions yield an empty mask; otherwise Otsu thresholding, the
// side with larger mean absolute deviation from the image median marked as
// defect, followed by one 3x3 majority-vote smoothing pass.
DefectMask segment_defect(const RgbImage& img, DefectClass predicted);

double normalized_area(const DefectMask& mask);
double edge_density(const RgbImage& img, const DefectMask& mask);
double color_histogram_entropy(const RgbImage& img, const DefectMask& mask,
                               int bins = kEntropyBins);

struct GlcmFeatures {
    double contrast = 0.0;
    double energy = 1.0;
    double homogeneity = 1.0;
    double correlation = 0.0;
};

GlcmFeatures glcm_features(const RgbImage& img, const DefectMask& mask);

FeatureVector extract_features(const RgbImage& img, DefectClass predicted);

}  // namespace solarscan
