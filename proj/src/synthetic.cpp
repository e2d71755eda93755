#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "solarscan/errors.hpp"
#include "solarscan/synthetic.hpp"

namespace solarscan {

namespace fs = std::filesystem;

namespace {

void set_px(RgbImage& img, int y, int x, float r, float g, float b) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    img.at(y, x, 0) = std::clamp(r, 0.0f, 1.0f);
    img.at(y, x, 1) = std::clamp(g, 0.0f, 1.0f);
    img.at(y, x, 2) = std::clamp(b, 0.0f, 1.0f);
}

void blend_px(RgbImage& img, int y, int x, float r, float g, float b, float alpha) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    img.at(y, x, 0) = std::clamp(img.at(y, x, 0) * (1 - alpha) + r * alpha, 0.0f, 1.0f);
    img.at(y, x, 1) = std::clamp(img.at(y, x, 1) * (1 - alpha) + g * alpha, 0.0f, 1.0f);
    img.at(y, x, 2) = std::clamp(img.at(y, x, 2) * (1 - alpha) + b * alpha, 0.0f, 1.0f);
}

// Dark blue cell array with faint grid lines and sensor noise.
RgbImage base_panel(int size, Rng& rng) {
    RgbImage img(size, size);
    const int cell = std::max(4, size / 8);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            float r = 0.08f, g = 0.12f, b = 0.35f;
            if (y % cell == 0 || x % cell == 0) {
                r = 0.65f;
                g = 0.65f;
                b = 0.70f;
            }
            const float n = static_cast<float>(rng.uniform(-0.02, 0.02));
            set_px(img, y, x, r + n, g + n, b + n);
        }
    }
    return img;
}

void draw_blob(RgbImage& img, int cy, int cx, double radius, float r, float g, float b,
               float alpha, Rng& rng) {
    const int ri = static_cast<int>(std::ceil(radius)) + 1;
    for (int dy = -ri; dy <= ri; ++dy) {
        for (int dx = -ri; dx <= ri; ++dx) {
            const double d = std::sqrt(static_cast<double>(dy * dy + dx * dx));
            const double wobble = rng.uniform(0.85, 1.15);
            if (d <= radius * wobble) {
                blend_px(img, cy + dy, cx + dx, r, g, b, alpha);
            }
        }
    }
}

void draw_crack(RgbImage& img, float r, float g, float b, Rng& rng) {
    double y = rng.uniform(0.1, 0.9) * img.height;
    double x = 0.0;
    double dir = rng.uniform(-0.5, 0.5);
    while (x < img.width) {
        dir += rng.uniform(-0.3, 0.3);
        dir = std::clamp(dir, -1.0, 1.0);
        y += dir;
        set_px(img, static_cast<int>(y), static_cast<int>(x), r, g, b);
        set_px(img, static_cast<int>(y) + 1, static_cast<int>(x), r, g, b);
        x += 1.0;
    }
}

}  // namespace

RgbImage render_synthetic_panel(DefectClass cls, SeverityGrade severity, int size, Rng& rng) {
    RgbImage img = base_panel(size, rng);
    // Minor defects cover a small extent, Major a large one.
    const double extent = severity == SeverityGrade::Major ? 0.75 : 0.35;
    const double rad = size * 0.18 * (severity == SeverityGrade::Major ? 1.8 : 1.0);

    switch (cls) {
        case DefectClass::Clean:
            break;
        case DefectClass::PhysicalDamage: {
            const int n = severity == SeverityGrade::Major ? 3 : 1;
            for (int i = 0; i < n; ++i) {
                draw_blob(img, static_cast<int>(rng.uniform(0.2, 0.8) * size),
                          static_cast<int>(rng.uniform(0.2, 0.8) * size), rad * 0.8, 0.45f,
                          0.38f, 0.30f, 0.9f, rng);
            }
            draw_crack(img, 0.35f, 0.30f, 0.25f, rng);
            break;
        }
        case DefectClass::BirdDropping: {
            const int n = severity == SeverityGrade::Major ? 5 : 2;
            for (int i = 0; i < n; ++i) {
                draw_blob(img, static_cast<int>(rng.uniform(0.1, 0.9) * size),
                          static_cast<int>(rng.uniform(0.1, 0.9) * size), rad * 0.5, 0.95f,
                          0.93f, 0.85f, 0.95f, rng);
            }
            break;
        }
        case DefectClass::ElectricalFault: {
            const int cy = static_cast<int>(rng.uniform(0.3, 0.7) * size);
            const int cx = static_cast<int>(rng.uniform(0.3, 0.7) * size);
            draw_blob(img, cy, cx, rad, 0.15f, 0.08f, 0.05f, 0.9f, rng);
            draw_blob(img, cy, cx, rad * 0.4, 0.95f, 0.45f, 0.10f, 0.9f, rng);
            break;
        }
        case DefectClass::SnowCover: {
            const int rows = static_cast<int>(extent * size);
            for (int y = 0; y < rows; ++y) {
                for (int x = 0; x < size; ++x) {
                    const float w = static_cast<float>(rng.uniform(0.85, 1.0));
                    blend_px(img, y, x, w, w, w, 0.95f);
                }
            }
            break;
        }
        case DefectClass::Soiling: {
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    if (rng.uniform01() < extent) {
                        blend_px(img, y, x, 0.45f, 0.33f, 0.18f, 0.55f);
                    }
                }
            }
            break;
        }
        case DefectClass::CellDamage: {
            const int cell = std::max(4, size / 8);
            const int n = severity == SeverityGrade::Major ? 6 : 2;
            for (int i = 0; i < n; ++i) {
                const int cy = static_cast<int>(rng.below(size / cell)) * cell;
                const int cx = static_cast<int>(rng.below(size / cell)) * cell;
                for (int y = cy + 1; y < cy + cell && y < size; ++y) {
                    for (int x = cx + 1; x < cx + cell && x < size; ++x) {
                        set_px(img, y, x, 0.02f, 0.02f, 0.05f);
                    }
                }
            }
            break;
        }
        case DefectClass::Breakage: {
            const int n = severity == SeverityGrade::Major ? 5 : 2;
            for (int i = 0; i < n; ++i) {
                draw_crack(img, 0.92f, 0.92f, 0.95f, rng);
            }
            break;
        }
        case DefectClass::Dust: {
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    if (rng.uniform01() < extent * 0.6) {
                        const float w = static_cast<float>(rng.uniform(0.55, 0.75));
                        blend_px(img, y, x, w, w, w * 0.95f, 0.8f);
                    }
                }
            }
            break;
        }
    }
    return img;
}

int generate_synthetic_dataset(const std::string& root, int per_class, int image_size,
                               std::uint64_t seed) {
    if (per_class < 1 || image_size < 16) {
        throw ArgumentError("per_class must be >= 1 and image_size >= 16");
    }
    fs::create_directories(root);
    std::ofstream csv(fs::path(root) / "severity.csv");
    if (!csv) {
        throw IoError("cannot write severity.csv under " + root);
    }
    csv << "image_id,grade\n";

    Rng rng(seed);
    int written = 0;
    for (int c = 0; c < kNumDefectClasses; ++c) {
        const DefectClass cls = static_cast<DefectClass>(c);
        const std::string& name = defect_class_names()[c];
        fs::create_directories(fs::path(root) / name);
        for (int i = 0; i < per_class; ++i) {
            const SeverityGrade grade =
                cls == DefectClass::Clean
                    ? SeverityGrade::Nil
                    : (i % 2 == 0 ? SeverityGrade::Minor : SeverityGrade::Major);
            Rng img_rng = rng.split();
            const RgbImage img = render_synthetic_panel(cls, grade, image_size, img_rng);
            char fname[64];
            std::snprintf(fname, sizeof(fname), "%s_%03d.png", name.c_str(), i);
            save_png(img, (fs::path(root) / name / fname).string());
            csv << name << "/" << fname << "," << severity_grade_name(grade) << "\n";
            ++written;
        }
    }
    if (!csv) {
        throw IoError("write failed for severity.csv under " + root);
    }
    return written;
}

}  // namespace solarscan
