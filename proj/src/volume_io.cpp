#include "medregion/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "medregion/error.hpp"
#include "medregion/file_util.hpp"

namespace medregion {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kNiftiHeaderSize = 348;
constexpr short kNiftiUInt8 = 2;
constexpr short kNiftiInt16 = 4;
constexpr short kNiftiFloat32 = 16;

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Field reader over a NIfTI header that may be in either byte order.
class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, bool swap)
      : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t offset) const {
    T value;
    std::memcpy(&value, bytes_.data() + offset, sizeof(T));
    if (swap_) {
      auto* p = reinterpret_cast<std::uint8_t*>(&value);
      std::reverse(p, p + sizeof(T));
    }
    return value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

float decode_voxel(const std::uint8_t* p, short datatype, bool swap) {
  switch (datatype) {
    case kNiftiUInt8:
      return static_cast<float>(*p);
    case kNiftiInt16: {
      std::uint8_t b[2] = {p[0], p[1]};
      if (swap) std::swap(b[0], b[1]);
      std::int16_t v;
      std::memcpy(&v, b, 2);
      return static_cast<float>(v);
    }
    default: {
      std::uint8_t b[4] = {p[0], p[1], p[2], p[3]};
      if (swap) std::reverse(b, b + 4);
      float v;
      std::memcpy(&v, b, 4);
      return v;
    }
  }
}

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

void encode_payload(const VolumeTensor& vol, std::vector<std::uint8_t>& out) {
  const auto data = vol.data();
  switch (vol.dtype()) {
    case DType::kUInt8:
      for (float v : data) out.push_back(static_cast<std::uint8_t>(v));
      break;
    case DType::kInt16:
      for (float v : data) {
        const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
        out.push_back(static_cast<std::uint8_t>(u & 0xff));
        out.push_back(static_cast<std::uint8_t>(u >> 8));
      }
      break;
    case DType::kFloat32:
      append_f32_le(out, data);
      break;
  }
}

std::vector<float> decode_payload(std::span<const std::uint8_t> bytes, DType dtype,
                                  std::size_t count) {
  std::vector<float> data(count);
  switch (dtype) {
    case DType::kUInt8:
      for (std::size_t i = 0; i < count; ++i) data[i] = bytes[i];
      break;
    case DType::kInt16:
      for (std::size_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
        data[i] = static_cast<std::int16_t>(u);
      }
      break;
    case DType::kFloat32:
      data = decode_f32_le(bytes.first(count * 4));
      break;
  }
  return data;
}

std::vector<std::size_t> size_array(const Json& j, const char* key, std::size_t n) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != n) {
    throw Error(ErrorCode::kSchemaViolation,
                std::string("'") + key + "' must be an array of " + std::to_string(n));
  }
  std::vector<std::size_t> out;
  for (const auto& v : *it) {
    if (!v.is_number_integer() || v.get<long long>() < 1) {
      throw Error(ErrorCode::kSchemaViolation,
                  std::string("'") + key + "' entries must be positive integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

bool spacing_close(const Spacing& a, const Spacing& b) {
  auto close = [](double x, double y) {
    return std::abs(x - y) <= 1e-5 * std::max(1.0, std::abs(y));
  };
  return close(a.z, b.z) && close(a.y, b.y) && close(a.x, b.x);
}

void check_matches_ct(const VolumeTensor& mask, const Dims& dims,
                      const Spacing& spacing, const std::string& what) {
  if (mask.dims() != dims) {
    throw Error(ErrorCode::kDimsMismatch, what + " dims differ from the CT volume");
  }
  if (!spacing_close(mask.spacing(), spacing)) {
    throw Error(ErrorCode::kDimsMismatch, what + " spacing differs from the CT volume");
  }
}

std::map<std::string, fs::path> optional_path_map(const Json& manifest,
                                                  const char* key) {
  std::map<std::string, fs::path> out;
  const auto it = manifest.find(key);
  if (it == manifest.end() || it->is_null()) return out;
  if (!it->is_object()) {
    throw Error(ErrorCode::kSchemaViolation, std::string("'") + key + "' must be an object");
  }
  for (const auto& [name, path] : it->items()) {
    if (!path.is_string()) {
      throw Error(ErrorCode::kSchemaViolation,
                  std::string(key) + "." + name + " must be a path string");
    }
    out.emplace(name, path.get<std::string>());
  }
  return out;
}

struct Manifest {
  std::string id;
  fs::path ct;
  std::array<fs::path, kNumRegions> regions;
  std::map<std::string, fs::path> lesions;
  std::map<std::string, fs::path> organs;
};

Manifest parse_manifest(const fs::path& manifest_path) {
  const Json doc = read_json_file(manifest_path);
  if (!doc.is_object()) {
    throw Error(ErrorCode::kSchemaViolation, "manifest must be a JSON object");
  }
  const fs::path base = manifest_path.parent_path();
  Manifest m;
  m.id = doc.contains("id") && doc["id"].is_string() ? doc["id"].get<std::string>()
                                                     : manifest_path.stem().string();
  if (!doc.contains("ct") || !doc["ct"].is_string()) {
    throw Error(ErrorCode::kSchemaViolation, "manifest needs a 'ct' path");
  }
  m.ct = resolve_relative(base, doc["ct"].get<std::string>());
  const auto regions = optional_path_map(doc, "regions");
  for (const auto& r : kRegions) {
    const auto it = regions.find(std::to_string(r.id));
    if (it == regions.end()) {
      throw Error(ErrorCode::kMissingRegion,
                  "manifest lacks region " + std::to_string(r.id) + " (" +
                      std::string(r.key) + ")");
    }
    m.regions[static_cast<std::size_t>(r.id - 1)] = resolve_relative(base, it->second);
  }
  for (const auto& [name, p] : optional_path_map(doc, "lesions")) {
    m.lesions.emplace(name, resolve_relative(base, p));
  }
  for (const auto& [name, p] : optional_path_map(doc, "organs")) {
    m.organs.emplace(name, resolve_relative(base, p));
  }
  return m;
}

RegionMaskSet load_masks_for(const Manifest& m, const Dims& dims,
                             const Spacing& spacing) {
  RegionMaskSet set;
  set.ct_dims = dims;
  set.ct_spacing = spacing;
  for (std::size_t i = 0; i < kNumRegions; ++i) {
    set.regions[i] = load_volume(m.regions[i], VolumeKind::kMask);
    check_matches_ct(set.regions[i], dims, spacing,
                     "region " + std::to_string(i + 1) + " mask");
  }
  for (const auto& [name, p] : m.lesions) {
    auto mask = load_volume(p, VolumeKind::kMask);
    check_matches_ct(mask, dims, spacing, "lesion '" + name + "' mask");
    set.lesions.emplace(name, std::move(mask));
  }
  for (const auto& [name, p] : m.organs) {
    auto mask = load_volume(p, VolumeKind::kMask);
    check_matches_ct(mask, dims, spacing, "organ '" + name + "' mask");
    set.organs.emplace(name, std::move(mask));
  }
  return set;
}

// Per-axis linear interpolation taps, half-pixel-centre convention.
struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> t;
};

Taps linear_taps(std::size_t in, std::size_t out) {
  Taps taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.t.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps.lo[i] = lo;
    taps.hi[i] = std::min(lo + 1, in - 1);
    taps.t[i] = src - static_cast<double>(lo);
  }
  return taps;
}

// Source index whose cell contains the centre of output cell i.
std::vector<std::size_t> nearest_taps(std::size_t in, std::size_t out) {
  std::vector<std::size_t> idx(out);
  for (std::size_t i = 0; i < out; ++i) {
    idx[i] = std::min((2 * i + 1) * in / (2 * out), in - 1);
  }
  return idx;
}

double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace

VolumeTensor load_nifti(const fs::path& path, VolumeKind kind) {
  const std::string name = path.string();
  std::vector<std::uint8_t> bytes = read_file_bytes(path);
  if (ends_with(name, ".gz")) bytes = gunzip(bytes);
  if (bytes.size() < kNiftiHeaderSize) {
    throw Error(ErrorCode::kMalformedHeader, name + ": shorter than a NIfTI-1 header");
  }
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  bool swap = false;
  if (sizeof_hdr != static_cast<std::int32_t>(kNiftiHeaderSize)) {
    swap = __builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == kNiftiHeaderSize;
    if (!swap) {
      throw Error(ErrorCode::kMalformedHeader, name + ": sizeof_hdr != 348");
    }
  }
  const HeaderReader hdr(bytes, swap);
  const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
  const bool single_file = std::memcmp(magic, "n+1\0", 4) == 0;
  const bool pair_file = std::memcmp(magic, "ni1\0", 4) == 0;
  if (!single_file && !pair_file) {
    throw Error(ErrorCode::kMalformedHeader, name + ": bad NIfTI-1 magic");
  }

  std::array<std::int16_t, 8> dim{};
  for (std::size_t i = 0; i < 8; ++i) dim[i] = hdr.get<std::int16_t>(40 + 2 * i);
  if (dim[0] < 3 || dim[0] > 7) {
    throw Error(ErrorCode::kMalformedHeader, name + ": expected a 3D volume (dim[0] == 3)");
  }
  // Trailing singleton axes (e.g. a 4D file with one frame) are accepted.
  for (int i = 4; i <= dim[0]; ++i) {
    if (dim[static_cast<std::size_t>(i)] != 1) {
      throw Error(ErrorCode::kMalformedHeader, name + ": expected a 3D volume (dim[0] == 3)");
    }
  }
  for (int i = 1; i <= 3; ++i) {
    if (dim[static_cast<std::size_t>(i)] < 1) {
      throw Error(ErrorCode::kMalformedHeader, name + ": non-positive dimension");
    }
  }
  const auto datatype = hdr.get<std::int16_t>(70);
  DType dtype;
  switch (datatype) {
    case kNiftiUInt8: dtype = DType::kUInt8; break;
    case kNiftiInt16: dtype = DType::kInt16; break;
    case kNiftiFloat32: dtype = DType::kFloat32; break;
    default:
      throw Error(ErrorCode::kUnsupportedDatatype,
                  name + ": datatype " + std::to_string(datatype) +
                      " (supported: 2 uint8, 4 int16, 16 float32)");
  }
  Spacing spacing{std::abs(hdr.get<float>(76 + 12)), std::abs(hdr.get<float>(76 + 8)),
                  std::abs(hdr.get<float>(76 + 4))};
  if (!(spacing.z > 0 && spacing.y > 0 && spacing.x > 0)) {
    throw Error(ErrorCode::kMalformedHeader, name + ": pixdim must be nonzero");
  }
  const float vox_offset = hdr.get<float>(108);
  const float slope = hdr.get<float>(112);
  const float inter = hdr.get<float>(116);

  const Dims dims{static_cast<std::size_t>(dim[3]), static_cast<std::size_t>(dim[2]),
                  static_cast<std::size_t>(dim[1])};
  const std::size_t payload_bytes = dims.count() * dtype_size(dtype);

  std::span<const std::uint8_t> payload;
  std::vector<std::uint8_t> image_bytes;
  if (single_file) {
    const auto offset = static_cast<std::size_t>(std::max(vox_offset, 352.0f));
    if (bytes.size() < offset || bytes.size() - offset < payload_bytes) {
      throw Error(ErrorCode::kTruncatedData, name + ": payload shorter than D*H*W*bytes");
    }
    payload = std::span<const std::uint8_t>(bytes).subspan(offset, payload_bytes);
  } else {
    std::string img = name;
    if (ends_with(img, ".hdr.gz")) {
      img.replace(img.size() - 7, 7, ".img.gz");
    } else if (ends_with(img, ".hdr")) {
      img.replace(img.size() - 4, 4, ".img");
    } else {
      throw Error(ErrorCode::kMalformedHeader, name + ": 'ni1' header must be a .hdr file");
    }
    image_bytes = read_file_bytes(img);
    if (ends_with(img, ".gz")) image_bytes = gunzip(image_bytes);
    const auto offset = static_cast<std::size_t>(std::max(vox_offset, 0.0f));
    if (image_bytes.size() < offset || image_bytes.size() - offset < payload_bytes) {
      throw Error(ErrorCode::kTruncatedData, img + ": payload shorter than D*H*W*bytes");
    }
    payload = std::span<const std::uint8_t>(image_bytes).subspan(offset, payload_bytes);
  }

  const std::size_t elem = dtype_size(dtype);
  std::vector<float> data(dims.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = decode_voxel(payload.data() + i * elem, datatype, swap);
  }
  if (slope != 0.0f && std::isfinite(slope) && (slope != 1.0f || inter != 0.0f)) {
    for (float& v : data) {
      v = static_cast<float>(static_cast<double>(v) * slope + inter);
    }
    dtype = DType::kFloat32;
  }
  return VolumeTensor(dims, spacing, dtype, kind, std::move(data));
}

void save_nifti(const VolumeTensor& vol, const fs::path& path) {
  std::vector<std::uint8_t> buf(352, 0);
  put<std::int32_t>(buf, 0, 348);
  const auto& d = vol.dims();
  const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d.w),
                                        static_cast<std::int16_t>(d.h),
                                        static_cast<std::int16_t>(d.d), 1, 1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, dim[i]);
  short datatype = kNiftiFloat32;
  if (vol.dtype() == DType::kUInt8) datatype = kNiftiUInt8;
  if (vol.dtype() == DType::kInt16) datatype = kNiftiInt16;
  put<std::int16_t>(buf, 70, datatype);
  put<std::int16_t>(buf, 72, static_cast<std::int16_t>(8 * dtype_size(vol.dtype())));
  const std::array<float, 8> pixdim{1.0f,
                                    static_cast<float>(vol.spacing().x),
                                    static_cast<float>(vol.spacing().y),
                                    static_cast<float>(vol.spacing().z),
                                    1.0f, 1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < 8; ++i) put<float>(buf, 76 + 4 * i, pixdim[i]);
  put<float>(buf, 108, 352.0f);
  put<float>(buf, 112, 0.0f);  // no intensity scaling
  put<float>(buf, 116, 0.0f);
  buf[123] = 2;                // xyzt_units: millimetres
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  encode_payload(vol, buf);
  if (ends_with(path.string(), ".gz")) {
    write_file_atomic(path, gzip(buf));
  } else {
    write_file_atomic(path, buf);
  }
}

fs::path raw_payload_path(const fs::path& header_path) {
  return sibling_with_extension(header_path, ".bin");
}

VolumeTensor load_raw_container(const fs::path& header_path) {
  const Json hdr = read_json_file(header_path);
  if (!hdr.is_object()) {
    throw Error(ErrorCode::kSchemaViolation, header_path.string() + ": header must be an object");
  }
  const auto dims_v = size_array(hdr, "dims", 3);
  const auto sp = hdr.find("spacing");
  if (sp == hdr.end() || !sp->is_array() || sp->size() != 3) {
    throw Error(ErrorCode::kSchemaViolation, "'spacing' must be an array of 3 numbers");
  }
  for (const auto& v : *sp) {
    if (!v.is_number() || !(v.get<double>() > 0)) {
      throw Error(ErrorCode::kSchemaViolation, "'spacing' entries must be positive numbers");
    }
  }
  if (!hdr.contains("dtype") || !hdr["dtype"].is_string()) {
    throw Error(ErrorCode::kSchemaViolation, "'dtype' must be a string");
  }
  const DType dtype = parse_dtype(hdr["dtype"].get<std::string>());
  VolumeKind kind = VolumeKind::kImage;
  if (hdr.contains("kind")) {
    if (!hdr["kind"].is_string()) {
      throw Error(ErrorCode::kSchemaViolation, "'kind' must be a string");
    }
    kind = parse_kind(hdr["kind"].get<std::string>());
  }
  const Dims dims{dims_v[0], dims_v[1], dims_v[2]};
  const Spacing spacing{(*sp)[0].get<double>(), (*sp)[1].get<double>(),
                        (*sp)[2].get<double>()};
  const auto payload = read_file_bytes(raw_payload_path(header_path));
  const std::size_t expected = dims.count() * dtype_size(dtype);
  if (payload.size() < expected) {
    throw Error(ErrorCode::kTruncatedData,
                raw_payload_path(header_path).string() + ": " +
                    std::to_string(payload.size()) + " bytes, expected " +
                    std::to_string(expected));
  }
  if (payload.size() > expected) {
    throw Error(ErrorCode::kDimsMismatch,
                raw_payload_path(header_path).string() + ": " +
                    std::to_string(payload.size()) + " bytes, expected " +
                    std::to_string(expected));
  }
  return VolumeTensor(dims, spacing, dtype, kind,
                      decode_payload(payload, dtype, dims.count()));
}

void save_raw_container(const VolumeTensor& vol, const fs::path& header_path) {
  Json hdr;
  hdr["dims"] = {vol.dims().d, vol.dims().h, vol.dims().w};
  hdr["spacing"] = {vol.spacing().z, vol.spacing().y, vol.spacing().x};
  hdr["dtype"] = dtype_name(vol.dtype());
  hdr["kind"] = kind_name(vol.kind());
  std::vector<std::uint8_t> payload;
  payload.reserve(vol.dims().count() * dtype_size(vol.dtype()));
  encode_payload(vol, payload);
  write_file_atomic(raw_payload_path(header_path), payload);
  write_file_atomic(header_path, hdr.dump() + "\n");
}

VolumeTensor load_volume(const fs::path& path, VolumeKind kind) {
  if (path.extension() == ".json") {
    VolumeTensor vol = load_raw_container(path);
    if (kind == VolumeKind::kMask && !vol.is_mask()) {
      // Re-validate as a mask; throws if any value is outside {0,1}.
      return VolumeTensor(vol.dims(), vol.spacing(), vol.dtype(), VolumeKind::kMask,
                          std::vector<float>(vol.data().begin(), vol.data().end()));
    }
    return vol;
  }
  return load_nifti(path, kind);
}

VolumeTensor normalize_minmax(const VolumeTensor& vol) {
  if (vol.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot normalize an empty volume");
  const auto data = vol.data();
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  const double lo = *mn;
  const double range = static_cast<double>(*mx) - lo;
  std::vector<float> out(data.size(), 0.0f);
  if (range > 0) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      out[i] = static_cast<float>((static_cast<double>(data[i]) - lo) / range);
    }
  }
  return VolumeTensor(vol.dims(), vol.spacing(), DType::kFloat32, VolumeKind::kImage,
                      std::move(out));
}

VolumeTensor resize_volume(const VolumeTensor& vol, const Dims& target, VolumeKind kind) {
  if (target.d < 1 || target.h < 1 || target.w < 1) {
    throw Error(ErrorCode::kEmptyTarget, "resize target must be >= 1 on every axis");
  }
  if (vol.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot resize an empty volume");
  const Dims& src = vol.dims();
  const Spacing spacing{vol.spacing().z * static_cast<double>(src.d) / static_cast<double>(target.d),
                        vol.spacing().y * static_cast<double>(src.h) / static_cast<double>(target.h),
                        vol.spacing().x * static_cast<double>(src.w) / static_cast<double>(target.w)};
  const auto data = vol.data();
  std::vector<float> out(target.count());

  if (kind == VolumeKind::kMask) {
    const auto iz = nearest_taps(src.d, target.d);
    const auto iy = nearest_taps(src.h, target.h);
    const auto ix = nearest_taps(src.w, target.w);
    std::size_t o = 0;
    for (std::size_t z = 0; z < target.d; ++z)
      for (std::size_t y = 0; y < target.h; ++y)
        for (std::size_t x = 0; x < target.w; ++x) out[o++] = vol.at(iz[z], iy[y], ix[x]);
    return VolumeTensor(target, spacing, vol.dtype(), VolumeKind::kMask, std::move(out));
  }

  if (target == src) {
    return VolumeTensor(target, spacing, DType::kFloat32, VolumeKind::kImage,
                        std::vector<float>(data.begin(), data.end()));
  }
  const Taps tz = linear_taps(src.d, target.d);
  const Taps ty = linear_taps(src.h, target.h);
  const Taps tx = linear_taps(src.w, target.w);
  std::size_t o = 0;
  for (std::size_t z = 0; z < target.d; ++z) {
    for (std::size_t y = 0; y < target.h; ++y) {
      for (std::size_t x = 0; x < target.w; ++x) {
        auto sample = [&](std::size_t zz, std::size_t yy) {
          return lerp(vol.at(zz, yy, tx.lo[x]), vol.at(zz, yy, tx.hi[x]), tx.t[x]);
        };
        const double z0 = lerp(sample(tz.lo[z], ty.lo[y]), sample(tz.lo[z], ty.hi[y]), ty.t[y]);
        const double z1 = lerp(sample(tz.hi[z], ty.lo[y]), sample(tz.hi[z], ty.hi[y]), ty.t[y]);
        out[o++] = static_cast<float>(lerp(z0, z1, tz.t[z]));
      }
    }
  }
  return VolumeTensor(target, spacing, DType::kFloat32, VolumeKind::kImage, std::move(out));
}

RegionMaskSet load_mask_set(const fs::path& manifest_path) {
  const Manifest m = parse_manifest(manifest_path);
  const VolumeTensor ct = load_volume(m.ct, VolumeKind::kImage);
  return load_masks_for(m, ct.dims(), ct.spacing());
}

Study load_study(const fs::path& manifest_path) {
  const Manifest m = parse_manifest(manifest_path);
  Study study;
  study.id = m.id;
  study.ct = load_volume(m.ct, VolumeKind::kImage);
  study.masks = load_masks_for(m, study.ct.dims(), study.ct.spacing());
  return study;
}

fs::path save_study(const Study& study, const fs::path& dir) {
  fs::create_directories(dir);
  Json manifest;
  manifest["id"] = study.id;
  save_raw_container(study.ct, dir / "ct.json");
  manifest["ct"] = "ct.json";
  Json regions = Json::object();
  for (const auto& r : kRegions) {
    const std::string file = "region_" + std::to_string(r.id) + ".json";
    save_raw_container(study.masks.region(r.id), dir / file);
    regions[std::to_string(r.id)] = file;
  }
  manifest["regions"] = regions;
  Json lesions = Json::object();
  for (const auto& [name, mask] : study.masks.lesions) {
    const std::string file = "lesion_" + name + ".json";
    save_raw_container(mask, dir / file);
    lesions[name] = file;
  }
  manifest["lesions"] = lesions;
  Json organs = Json::object();
  for (const auto& [name, mask] : study.masks.organs) {
    const std::string file = "organ_" + name + ".json";
    save_raw_container(mask, dir / file);
    organs[name] = file;
  }
  manifest["organs"] = organs;
  const fs::path manifest_path = dir / "manifest.json";
  write_json_file(manifest_path, manifest);
  return manifest_path;
}

}  // namespace medregion
