#include "medregion/volume.hpp"

#include <cmath>

#include "medregion/error.hpp"

namespace medregion {

const RegionInfo& region_info(int id) {
  if (!is_valid_region(id)) {
    throw Error(ErrorCode::kInvalidArgument,
                "region id " + std::to_string(id) + " outside 1..6");
  }
  return kRegions[static_cast<std::size_t>(id - 1)];
}

std::optional<int> region_id_from_key(std::string_view key) {
  for (const auto& r : kRegions) {
    if (r.key == key) return r.id;
  }
  return std::nullopt;
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kUInt8: return "uint8";
    case DType::kInt16: return "int16";
    case DType::kFloat32: return "float32";
  }
  return "float32";
}

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kUInt8: return 1;
    case DType::kInt16: return 2;
    case DType::kFloat32: return 4;
  }
  return 4;
}

DType parse_dtype(std::string_view name) {
  if (name == "uint8") return DType::kUInt8;
  if (name == "int16") return DType::kInt16;
  if (name == "float32") return DType::kFloat32;
  throw Error(ErrorCode::kSchemaViolation, "unknown dtype '" + std::string(name) + "'");
}

std::string_view kind_name(VolumeKind kind) {
  return kind == VolumeKind::kMask ? "mask" : "image";
}

VolumeKind parse_kind(std::string_view name) {
  if (name == "image") return VolumeKind::kImage;
  if (name == "mask") return VolumeKind::kMask;
  throw Error(ErrorCode::kSchemaViolation, "unknown kind '" + std::string(name) + "'");
}

VolumeTensor::VolumeTensor(Dims dims, Spacing spacing, DType dtype,
                           VolumeKind kind, std::vector<float> data)
    : dims_(dims), spacing_(spacing), dtype_(dtype), kind_(kind),
      data_(std::move(data)) {
  if (data_.size() != dims_.count()) {
    throw Error(ErrorCode::kDimsMismatch,
                "data length " + std::to_string(data_.size()) + " != D*H*W " +
                    std::to_string(dims_.count()));
  }
  if (!(spacing_.z > 0 && spacing_.y > 0 && spacing_.x > 0)) {
    throw Error(ErrorCode::kSchemaViolation, "spacing components must be > 0");
  }
  if (kind_ == VolumeKind::kMask) {
    for (float v : data_) {
      if (v != 0.0f && v != 1.0f) {
        throw Error(ErrorCode::kSchemaViolation,
                    "mask value " + std::to_string(v) + " not in {0,1}");
      }
    }
    return;
  }
  if (dtype_ == DType::kFloat32) return;
  const float lo = dtype_ == DType::kUInt8 ? 0.0f : -32768.0f;
  const float hi = dtype_ == DType::kUInt8 ? 255.0f : 32767.0f;
  for (float v : data_) {
    if (!(v >= lo && v <= hi) || std::nearbyint(v) != v) {
      throw Error(ErrorCode::kSchemaViolation,
                  "value " + std::to_string(v) + " not representable as " +
                      std::string(dtype_name(dtype_)));
    }
  }
}

VolumeTensor VolumeTensor::zeros(Dims dims, Spacing spacing, DType dtype,
                                 VolumeKind kind) {
  return VolumeTensor(dims, spacing, dtype, kind, std::vector<float>(dims.count(), 0.0f));
}

std::size_t VolumeTensor::count_positive() const {
  std::size_t n = 0;
  for (float v : data_) n += v != 0.0f;
  return n;
}

const VolumeTensor& RegionMaskSet::region(int id) const {
  return regions[static_cast<std::size_t>(region_info(id).id - 1)];
}

}  // namespace medregion
