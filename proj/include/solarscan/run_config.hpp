#pragma once

#include <cstdint>
#include <string>

#include "solarscan/augment.hpp"
#include "solarscan/severity.hpp"
#include "solarscan/vit.hpp"

namespace solarscan {

// Everything a batch run needs, loadable from a key = value file. Defaults
// are the shipped training hyperparameters.
struct RunConfig {
    ViTConfig vit;
    OptimizerConfig optimizer;
    AugmentationConfig augmentation;
    ForestConfig forest;
    int epochs = 10;
    int batch_size = 16;
    double split_fraction = 0.7;
    TrainableSelector selector = TrainableSelector::HeadOnly;
    bool augment_enabled = true;
    std::uint64_t seed = 42;

    void validate() const;
};

// Parses a key = value file ('#' starts a comment). Unknown keys are errors.
RunConfig load_run_config(const std::string& path);

void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);

// Every key with its current value, in file-ready form.
std::string run_config_text(const RunConfig& cfg);

}  // namespace solarscan
