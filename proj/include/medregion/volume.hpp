#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "medregion/regions.hpp"

namespace medregion {

enum class DType { kUInt8, kInt16, kFloat32 };
enum class VolumeKind { kImage, kMask };

std::string_view dtype_name(DType dtype);
std::size_t dtype_size(DType dtype);
DType parse_dtype(std::string_view name);  // throws SchemaViolation
std::string_view kind_name(VolumeKind kind);
VolumeKind parse_kind(std::string_view name);  // throws SchemaViolation

// Voxel counts, depth slowest.
struct Dims {
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const { return d * h * w; }
  std::size_t slice_size() const { return h * w; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Millimetres per voxel along (z, y, x).
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  double voxel_volume() const { return z * y * x; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

// A 3D scalar grid. Values are held as float regardless of the declared
// dtype; uint8 and int16 are represented exactly, so encoding back to the
// declared dtype is lossless.
class VolumeTensor {
 public:
  VolumeTensor() = default;
  // Validates the invariants; throws DimsMismatch / SchemaViolation.
  VolumeTensor(Dims dims, Spacing spacing, DType dtype, VolumeKind kind,
               std::vector<float> data);

  static VolumeTensor zeros(Dims dims, Spacing spacing, DType dtype,
                            VolumeKind kind);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  DType dtype() const { return dtype_; }
  VolumeKind kind() const { return kind_; }
  bool is_mask() const { return kind_ == VolumeKind::kMask; }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<const float> slice(std::size_t z) const {
    return std::span<const float>(data_).subspan(z * dims_.slice_size(),
                                                 dims_.slice_size());
  }
  float at(std::size_t z, std::size_t y, std::size_t x) const {
    return data_[(z * dims_.h + y) * dims_.w + x];
  }
  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * dims_.h + y) * dims_.w + x;
  }

  // Number of voxels with a nonzero value.
  std::size_t count_positive() const;

  friend bool operator==(const VolumeTensor&, const VolumeTensor&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  DType dtype_ = DType::kFloat32;
  VolumeKind kind_ = VolumeKind::kImage;
  std::vector<float> data_;
};

// Pseudo-masks for one study. Region entries are indexed by region id - 1.
struct RegionMaskSet {
  std::array<VolumeTensor, kNumRegions> regions;
  std::map<std::string, VolumeTensor> lesions;
  std::map<std::string, VolumeTensor> organs;
  Dims ct_dims;
  Spacing ct_spacing;

  const VolumeTensor& region(int id) const;
};

// CT volume and its masks as declared by one manifest.
struct Study {
  std::string id;
  VolumeTensor ct;
  RegionMaskSet masks;
};

}  // namespace medregion
