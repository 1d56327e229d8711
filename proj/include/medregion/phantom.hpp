#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "medregion/volume.hpp"

namespace medregion {

// Synthetic chest CT built from ellipsoids and cylinders, with matching region
// masks, organ masks (lung, heart, liver, kidney) and two lesion masks
// (lung_nodule with two components, liver_cyst with one).
struct PhantomOptions {
  Dims dims{40, 96, 96};
  Spacing spacing{7.5, 3.5, 3.5};
  std::uint64_t seed = 7;
  std::string id = "phantom";
};

Study make_phantom(const PhantomOptions& options = {});

// Writes the CT as int16 NIfTI, region and organ masks as gzipped NIfTI,
// lesion masks as raw containers, plus manifest.json. Returns the manifest.
std::filesystem::path write_phantom(const Study& study, const std::filesystem::path& dir);

}  // namespace medregion
