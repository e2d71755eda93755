#pragma once

#include <cstdint>
#include <string>

#include "solarscan/image.hpp"
#include "solarscan/rng.hpp"
#include "solarscan/severity.hpp"
#include "solarscan/vit.hpp"

namespace solarscan {

// Procedurally renders one sample of the given class. severity selects the
// defect extent (Nil for Clean, Minor/Major otherwise).
RgbImage render_synthetic_panel(DefectClass cls, SeverityGrade severity, int size, Rng& rng);

// Writes a directory-per-class dataset plus severity.csv under root.
// Returns the number of images written.
int generate_synthetic_dataset(const std::string& root, int per_class, int image_size,
                               std::uint64_t seed);

}  // namespace solarscan
