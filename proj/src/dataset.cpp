#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "solarscan/dataset.hpp"
#include "solarscan/errors.hpp"
#include "solarscan/severity.hpp"

namespace solarscan {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    return fields;
}

}  // namespace

std::vector<DatasetEntry> scan_dataset(const std::string& root) {
    if (!fs::is_directory(root)) {
        throw ManifestError("dataset root is not a directory: " + root);
    }
    std::vector<DatasetEntry> entries;
    for (int c = 0; c < kNumDefectClasses; ++c) {
        const std::string& name = defect_class_names()[c];
        const fs::path dir = fs::path(root) / name;
        if (!fs::is_directory(dir)) {
            throw ManifestError("missing class directory '" + name + "' under " + root);
        }
        std::vector<fs::path> files;
        for (const auto& de : fs::directory_iterator(dir)) {
            if (de.is_regular_file() && is_image_file(de.path())) {
                files.push_back(de.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            entries.push_back({name + "/" + f.filename().string(), f.string(), c});
        }
    }
    return entries;
}

std::map<std::string, int> read_severity_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open severity CSV: " + path);
    }
    std::map<std::string, int> grades;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (first && fields.size() >= 2 && fields[1] == "grade") {
            first = false;
            continue;  // header row
        }
        first = false;
        if (fields.size() != 2) {
            throw FormatError("bad severity CSV line in " + path + ": " + line);
        }
        const int code = severity_grade_code(fields[1]);
        if (code < 0) {
            throw FormatError("unknown severity grade '" + fields[1] + "' in " + path);
        }
        grades[fields[0]] = code;
    }
    return grades;
}

void write_split_manifest(const std::string& path,
                          const std::vector<SplitManifestEntry>& entries) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot write split manifest: " + path);
    }
    for (const auto& e : entries) {
        os << e.id << "," << e.label << "," << (e.is_train ? "train" : "test") << "\n";
    }
    if (!os) {
        throw IoError("write failed: " + path);
    }
}

std::vector<SplitManifestEntry> read_split_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open split manifest: " + path);
    }
    std::vector<SplitManifestEntry> entries;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3 || (fields[2] != "train" && fields[2] != "test")) {
            throw FormatError("bad split manifest line in " + path + ": " + line);
        }
        entries.push_back({fields[0], std::stoi(fields[1]), fields[2] == "train"});
    }
    return entries;
}

std::string feature_csv_header() {
    return "image_id,class_code,normalized_area,edge_density,color_entropy,"
           "glcm_contrast,glcm_energy,glcm_homogeneity,glcm_correlation";
}

std::string feature_csv_row(const std::string& id, int class_code, const FeatureVector& fv) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", id.c_str(),
                  class_code, fv.normalized_area, fv.edge_density, fv.color_entropy,
                  fv.glcm_contrast, fv.glcm_energy, fv.glcm_homogeneity, fv.glcm_correlation);
    return buf;
}

}  // namespace solarscan
