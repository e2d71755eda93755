#include <algorithm>
#include <cmath>

#include "solarscan/errors.hpp"
#include "solarscan/image.hpp"

namespace solarscan {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

RgbImage resize_bilinear(const RgbImage& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) {
        throw ArgumentError("resize target dimensions must be positive");
    }
    if (out_w == img.width && out_h == img.height) {
        return img;
    }
    RgbImage out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        // align-corners=false: sample at pixel centers
        const double fy = (oy + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double ty = fy - y0;
        const int ya = clampi(y0, 0, img.height - 1);
        const int yb = clampi(y0 + 1, 0, img.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double tx = fx - x0;
            const int xa = clampi(x0, 0, img.width - 1);
            const int xb = clampi(x0 + 1, 0, img.width - 1);
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - tx) * img.at(ya, xa, c) + tx * img.at(ya, xb, c);
                const double bot = (1.0 - tx) * img.at(yb, xa, c) + tx * img.at(yb, xb, c);
                const double v = (1.0 - ty) * top + ty * bot;
                out.at(oy, ox, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

RgbImage flip_horizontal(const RgbImage& img) {
    RgbImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
            }
        }
    }
    return out;
}

RgbImage flip_vertical(const RgbImage& img) {
    RgbImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
            }
        }
    }
    return out;
}

RgbImage rotate_image(const RgbImage& img, double degrees) {
    if (degrees == 0.0) {
        return img;
    }
    const double rad = degrees * M_PI / 180.0;
    const double ca = std::cos(rad);
    const double sa = std::sin(rad);
    const double cx = (img.width - 1) / 2.0;
    const double cy = (img.height - 1) / 2.0;
    RgbImage out(img.width, img.height);
    for (int oy = 0; oy < img.height; ++oy) {
        for (int ox = 0; ox < img.width; ++ox) {
            // inverse map: rotate the output coordinate back into the source
            const double dx = ox - cx;
            const double dy = oy - cy;
            const double fx = cx + ca * dx + sa * dy;
            const double fy = cy - sa * dx + ca * dy;
            const int x0 = static_cast<int>(std::floor(fx));
            const int y0 = static_cast<int>(std::floor(fy));
            const double tx = fx - x0;
            const double ty = fy - y0;
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 2; ++j) {
                    for (int i = 0; i < 2; ++i) {
                        const int xs = x0 + i;
                        const int ys = y0 + j;
                        const double w = (i ? tx : 1.0 - tx) * (j ? ty : 1.0 - ty);
                        if (w == 0.0) continue;
                        double v = 0.0;  // zero fill outside
                        if (xs >= 0 && xs < img.width && ys >= 0 && ys < img.height) {
                            v = img.at(ys, xs, c);
                        }
                        acc += w * v;
                    }
                }
                out.at(oy, ox, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
        }
    }
    return out;
}

RgbImage crop(const RgbImage& img, int x0, int y0, int w, int h) {
    if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height) {
        throw ArgumentError("crop window out of bounds");
    }
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
            }
        }
    }
    return out;
}

std::vector<float> to_grayscale(const RgbImage& img) {
    std::vector<float> g(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            g[static_cast<std::size_t>(y) * img.width + x] =
                0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
        }
    }
    return g;
}

Tensor normalize(const RgbImage& img, const std::array<double, 3>& mean,
                 const std::array<double, 3>& stddev) {
    for (double s : stddev) {
        if (s <= 0.0) {
            throw ArgumentError("normalization std must be positive");
        }
    }
    const std::size_t hw = static_cast<std::size_t>(img.width) * img.height;
    Tensor out({3, static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                out.data[c * hw + static_cast<std::size_t>(y) * img.width + x] =
                    (static_cast<double>(img.at(y, x, c)) - mean[c]) / stddev[c];
            }
        }
    }
    return out;
}

}  // namespace solarscan
