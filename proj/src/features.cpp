#include <algorithm>
#include <cmath>

#include "solarscan/errors.hpp"
#include "solarscan/features.hpp"

namespace solarscan {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

int quantize_bin(float v, int bins) {
    int b = static_cast<int>(v * bins);
    return clampi(b, 0, bins - 1);
}

}  // namespace

std::size_t DefectMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true));
}

int otsu_threshold(const std::vector<float>& gray) {
    std::array<std::size_t, 256> hist{};
    for (float v : gray) {
        hist[quantize_bin(v, 256)]++;
    }
    const double total = static_cast<double>(gray.size());
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += i * static_cast<double>(hist[i]);

    double w0 = 0.0, sum0 = 0.0;
    double best_var = -1.0;
    int best_t = 0;
    for (int t = 0; t < 256; ++t) {
        w0 += static_cast<double>(hist[t]);
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += t * static_cast<double>(hist[t]);
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_t = t;
        }
    }
    return best_t;
}

DefectMask segment_defect(const RgbImage& img, DefectClass predicted) {
    if (img.width < 1 || img.height < 1) {
        throw ArgumentError("segment_defect requires a nonempty image");
    }
    DefectMask mask(img.width, img.height, false);
    if (predicted == DefectClass::Clean) {
        return mask;
    }
    const std::vector<float> gray = to_grayscale(img);
    const int t = otsu_threshold(gray);
    const float thresh = (t + 1) / 256.0f;  // bin t and below -> low side

    std::vector<float> sorted = gray;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const float median = sorted[sorted.size() / 2];

    double dev_low = 0.0, dev_high = 0.0;
    std::size_t n_low = 0, n_high = 0;
    for (float v : gray) {
        if (v < thresh) {
            dev_low += std::abs(v - median);
            ++n_low;
        } else {
            dev_high += std::abs(v - median);
            ++n_high;
        }
    }
    const double mad_low = n_low ? dev_low / n_low : 0.0;
    const double mad_high = n_high ? dev_high / n_high : 0.0;
    const bool defect_is_low = mad_low > mad_high;

    DefectMask raw(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const bool low = gray[static_cast<std::size_t>(y) * img.width + x] < thresh;
            raw.set(y, x, low == defect_is_low);
        }
    }

    // One 3x3 majority-vote pass; borders vote over in-bounds cells only.
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int votes = 0, cells = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= img.height || nx < 0 || nx >= img.width) continue;
                    ++cells;
                    if (raw.at(ny, nx)) ++votes;
                }
            }
            mask.set(y, x, 2 * votes > cells);
        }
    }
    return mask;
}

double normalized_area(const DefectMask& mask) {
    if (mask.bits.empty()) return 0.0;
    return static_cast<double>(mask.count()) / static_cast<double>(mask.bits.size());
}

double edge_density(const RgbImage& img, const DefectMask& mask) {
    if (img.width < 3 || img.height < 3) {
        throw ArgumentError("edge_density requires an image of at least 3x3");
    }
    const std::size_t region = mask.count();
    if (region == 0) return 0.0;

    const std::vector<float> gray = to_grayscale(img);
    auto g = [&](int y, int x) {
        return static_cast<double>(
            gray[static_cast<std::size_t>(clampi(y, 0, img.height - 1)) * img.width +
                 clampi(x, 0, img.width - 1)]);
    };
    std::size_t edges_in_mask = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask.at(y, x)) continue;
            const double gx = (g(y - 1, x + 1) + 2.0 * g(y, x + 1) + g(y + 1, x + 1)) -
                              (g(y - 1, x - 1) + 2.0 * g(y, x - 1) + g(y + 1, x - 1));
            const double gy = (g(y + 1, x - 1) + 2.0 * g(y + 1, x) + g(y + 1, x + 1)) -
                              (g(y - 1, x - 1) + 2.0 * g(y - 1, x) + g(y - 1, x + 1));
            if (std::sqrt(gx * gx + gy * gy) > kEdgeMagnitudeThreshold) {
                ++edges_in_mask;
            }
        }
    }
    return static_cast<double>(edges_in_mask) / static_cast<double>(region);
}

double color_histogram_entropy(const RgbImage& img, const DefectMask& mask, int bins) {
    if (bins < 2) {
        throw ArgumentError("entropy needs at least 2 bins");
    }
    const std::size_t region = mask.count();
    if (region == 0) return 0.0;

    double total_entropy = 0.0;
    for (int c = 0; c < 3; ++c) {
        std::vector<std::size_t> hist(bins, 0);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (mask.at(y, x)) {
                    hist[quantize_bin(img.at(y, x, c), bins)]++;
                }
            }
        }
        double entropy = 0.0;
        for (std::size_t n : hist) {
            if (n == 0) continue;
            const double p = static_cast<double>(n) / static_cast<double>(region);
            entropy -= p * std::log2(p);
        }
        total_entropy += entropy;
    }
    return total_entropy / 3.0;
}

GlcmFeatures glcm_features(const RgbImage& img, const DefectMask& mask) {
    if (img.width < 2 || img.height < 2) {
        throw ArgumentError("glcm_features requires an image of at least 2x2");
    }
    const std::vector<float> gray = to_grayscale(img);
    std::vector<int> level(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        level[i] = quantize_bin(gray[i], kGlcmLevels);
    }

    // Symmetric co-occurrence over 4 offsets, pairs fully inside the mask.
    static constexpr int offsets[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    std::array<double, kGlcmLevels * kGlcmLevels> co{};
    double pairs = 0.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask.at(y, x)) continue;
            for (const auto& off : offsets) {
                const int ny = y + off[0], nx = x + off[1];
                if (ny < 0 || ny >= img.height || nx < 0 || nx >= img.width) continue;
                if (!mask.at(ny, nx)) continue;
                const int a = level[static_cast<std::size_t>(y) * img.width + x];
                const int b = level[static_cast<std::size_t>(ny) * img.width + nx];
                co[a * kGlcmLevels + b] += 1.0;
                co[b * kGlcmLevels + a] += 1.0;
                pairs += 2.0;
            }
        }
    }
    if (pairs < 2.0) {
        return GlcmFeatures{};  // degenerate fallback (0, 1, 1, 0)
    }

    GlcmFeatures f;
    f.contrast = 0.0;
    f.energy = 0.0;
    f.homogeneity = 0.0;
    std::array<double, kGlcmLevels> mi{}, mj{};
    for (int i = 0; i < kGlcmLevels; ++i) {
        for (int j = 0; j < kGlcmLevels; ++j) {
            const double p = co[i * kGlcmLevels + j] / pairs;
            if (p == 0.0) continue;
            f.contrast += p * (i - j) * (i - j);
            f.energy += p * p;
            f.homogeneity += p / (1.0 + std::abs(i - j));
            mi[i] += p;
            mj[j] += p;
        }
    }
    double mu_i = 0.0, mu_j = 0.0;
    for (int i = 0; i < kGlcmLevels; ++i) {
        mu_i += i * mi[i];
        mu_j += i * mj[i];
    }
    double var_i = 0.0, var_j = 0.0;
    for (int i = 0; i < kGlcmLevels; ++i) {
        var_i += (i - mu_i) * (i - mu_i) * mi[i];
        var_j += (i - mu_j) * (i - mu_j) * mj[i];
    }
    if (var_i > 0.0 && var_j > 0.0) {
        double corr = 0.0;
        for (int i = 0; i < kGlcmLevels; ++i) {
            for (int j = 0; j < kGlcmLevels; ++j) {
                const double p = co[i * kGlcmLevels + j] / pairs;
                if (p == 0.0) continue;
                corr += p * (i - mu_i) * (j - mu_j);
            }
        }
        f.correlation = corr / std::sqrt(var_i * var_j);
    } else {
        f.correlation = 0.0;
    }
    return f;
}

FeatureVector extract_features(const RgbImage& img, DefectClass predicted) {
    const DefectMask mask = segment_defect(img, predicted);
    FeatureVector fv;
    fv.normalized_area = normalized_area(mask);
    fv.edge_density = edge_density(img, mask);
    fv.color_entropy = color_histogram_entropy(img, mask);
    const GlcmFeatures g = glcm_features(img, mask);
    fv.glcm_contrast = g.contrast;
    fv.glcm_energy = g.energy;
    fv.glcm_homogeneity = g.homogeneity;
    fv.glcm_correlation = g.correlation;
    return fv;
}

}  // namespace solarscan
