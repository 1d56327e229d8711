#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "medregion/file_util.hpp"
#include "medregion/volume.hpp"

namespace medregion {

enum class Connectivity { k6 = 6, k26 = 26 };
enum class LengthUnit { kMillimetre, kVoxel };

struct ComponentLabels {
  std::vector<std::uint32_t> labels;  // same layout as the mask, 0 = background
  std::uint32_t num_objects = 0;
};

// Labels 1..n assigned in first-encounter raster order (depth slowest).
ComponentLabels label_components_3d(const VolumeTensor& mask,
                                    Connectivity connectivity = Connectivity::k26);

std::uint32_t count_mask(const VolumeTensor& mask,
                         Connectivity connectivity = Connectivity::k26);

// One diameter per component, in label order: the largest bounding-box side,
// with extent = max_index + 1 - min_index along each axis. In millimetre mode
// each side is scaled by the spacing of its axis.
std::vector<double> get_diameters(const VolumeTensor& mask, const Spacing& spacing,
                                  LengthUnit unit = LengthUnit::kMillimetre,
                                  Connectivity connectivity = Connectivity::k26);

// Positive voxels times voxel volume, in millilitres.
double organ_volume(const VolumeTensor& mask, const Spacing& spacing);

inline constexpr std::string_view kUnspecifiedLocation = "unspecified";

// Region name from the lesion's name prefix ("lung_nodule" -> "lung"), else
// the region with the largest voxel overlap (ties to the lower id), else
// "unspecified".
std::string lesion_location(const std::string& lesion_name, const VolumeTensor& lesion_mask,
                            const RegionMaskSet& regions);

struct LesionStats {
  std::uint32_t count = 0;
  std::vector<double> diameters;
  std::string location;
  friend bool operator==(const LesionStats&, const LesionStats&) = default;
};

struct PatientAttributes {
  std::map<std::string, double> organ_volumes_ml;
  std::map<std::string, LesionStats> lesions;
  Spacing spacing;
  LengthUnit diameter_unit = LengthUnit::kMillimetre;
  friend bool operator==(const PatientAttributes&, const PatientAttributes&) = default;
};

struct AttributeOptions {
  LengthUnit diameter_unit = LengthUnit::kMillimetre;
  Connectivity connectivity = Connectivity::k26;
};

PatientAttributes extract_attributes(const RegionMaskSet& masks, const Spacing& spacing,
                                     const AttributeOptions& options = {});

Json attributes_to_json(const PatientAttributes& attrs);
PatientAttributes attributes_from_json(const Json& doc);

}  // namespace medregion
