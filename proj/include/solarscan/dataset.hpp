#pragma once

#include <map>
#include <string>
#include <vector>

#include "solarscan/features.hpp"
#include "solarscan/vit.hpp"

namespace solarscan {

struct DatasetEntry {
    std::string id;    // "ClassName/filename"
    std::string path;  // absolute or root-relative file path
    int label = 0;
};

// Directory-per-class layout under root, one subdirectory per defect class.
// Every class directory must exist; missing ones raise ManifestError naming
// the class.
std::vector<DatasetEntry> scan_dataset(const std::string& root);

// id -> grade code (0 nil, 1 minor, 2 major) from a "image_id,grade" CSV.
std::map<std::string, int> read_severity_csv(const std::string& path);

struct SplitManifestEntry {
    std::string id;
    int label = 0;
    bool is_train = false;
};

void write_split_manifest(const std::string& path,
                          const std::vector<SplitManifestEntry>& entries);
std::vector<SplitManifestEntry> read_split_manifest(const std::string& path);

// Fixed feature-CSV column order shared by extract-features and tests.
std::string feature_csv_header();
std::string feature_csv_row(const std::string& id, int class_code, const FeatureVector& fv);

}  // namespace solarscan
