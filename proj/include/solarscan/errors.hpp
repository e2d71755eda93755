#pragma once

#include <stdexcept>
#include <string>

namespace solarscan {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Saved model does not match the requested configuration.
struct IncompatibleModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backward called with a cache that does not match the forward pass.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Dataset directory layout does not match the manifest contract.
struct ManifestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace solarscan
