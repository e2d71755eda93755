#pragma once

#include <string>

#include "solarscan/severity.hpp"
#include "solarscan/vit.hpp"

namespace solarscan {

// Self-describing container shared by the classifier and the forest:
//   "SFSM" | u32 version | u32 header_len | JSON header | u32 tensor_count |
//   tensor records: u32 name_len | name | u8 dtype | u8 ndim | u64 dims... |
//   payload (little-endian; dtype 0 = f32, 1 = i32, 2 = f64).
// Classifier parameters are stored as 32-bit floats.

inline constexpr std::uint32_t kContainerVersion = 1;

void save_model(const ViTModel& model, const std::string& path);

// Loads a classifier using the configuration recorded in the file.
ViTModel load_model(const std::string& path);

// Loads a classifier and checks every tensor against cfg; a mismatch raises
// IncompatibleModelError naming the tensor and both shapes.
ViTModel import_weights(const std::string& path, const ViTConfig& cfg);

void save_forest(const RandomForestModel& model, const std::string& path);
RandomForestModel load_forest(const std::string& path);

}  // namespace solarscan
