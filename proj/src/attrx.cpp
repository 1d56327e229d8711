#include "medregion/attrx.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <numeric>
#include <optional>

#include "medregion/error.hpp"

namespace medregion {

namespace {

// Disjoint-set forest over provisional labels; index 0 unused.
class UnionFind {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::uint32_t> parent_{0};
};

struct Offset {
  int dz, dy, dx;
};

// Neighbours already visited in a raster scan.
std::vector<Offset> backward_neighbours(Connectivity connectivity) {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 0; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
        const int manhattan = std::abs(dz) + std::abs(dy) + std::abs(dx);
        if (connectivity == Connectivity::k6 && manhattan != 1) continue;
        out.push_back({dz, dy, dx});
      }
  return out;
}

struct BoundingBox {
  std::array<std::size_t, 3> lo{~std::size_t{0}, ~std::size_t{0}, ~std::size_t{0}};
  std::array<std::size_t, 3> hi{0, 0, 0};

  void add(std::size_t z, std::size_t y, std::size_t x) {
    lo = {std::min(lo[0], z), std::min(lo[1], y), std::min(lo[2], x)};
    hi = {std::max(hi[0], z), std::max(hi[1], y), std::max(hi[2], x)};
  }
  std::size_t extent(int axis) const { return hi[axis] + 1 - lo[axis]; }
};

struct LocationAlias {
  std::string_view prefix;
  int region;
};

constexpr std::array<LocationAlias, 29> kLocationAliases{{
    {"lung", 1},          {"lungs", 1},       {"pulmonary", 1},
    {"large_airways", 2}, {"airway", 2},      {"airways", 2},
    {"trachea", 2},       {"bronchus", 2},    {"bronchi", 2},
    {"mediastinum", 3},   {"mediastinal", 3}, {"heart_great_vessels", 4},
    {"heart", 4},         {"cardiac", 4},     {"aorta", 4},
    {"aortic", 4},        {"pericardial", 4}, {"osseous", 5},
    {"bone", 5},          {"rib", 5},         {"vertebra", 5},
    {"spine", 5},         {"upper_abdomen", 6}, {"liver", 6},
    {"hepatic", 6},       {"kidney", 6},      {"renal", 6},
    {"spleen", 6},        {"adrenal", 6},
}};

std::optional<int> region_from_name(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& alias : kLocationAliases) {
    if (lower.size() >= alias.prefix.size() &&
        lower.compare(0, alias.prefix.size(), alias.prefix) == 0 &&
        (lower.size() == alias.prefix.size() || lower[alias.prefix.size()] == '_' ||
         lower[alias.prefix.size()] == '-')) {
      return alias.region;
    }
  }
  return std::nullopt;
}

}  // namespace

ComponentLabels label_components_3d(const VolumeTensor& mask, Connectivity connectivity) {
  const Dims& dims = mask.dims();
  const auto data = mask.data();
  ComponentLabels out;
  out.labels.assign(data.size(), 0);
  UnionFind uf;
  const auto neighbours = backward_neighbours(connectivity);
  const auto D = static_cast<long>(dims.d), H = static_cast<long>(dims.h),
             W = static_cast<long>(dims.w);

  for (long z = 0; z < D; ++z)
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        const std::size_t i = static_cast<std::size_t>((z * H + y) * W + x);
        if (data[i] == 0.0f) continue;
        std::uint32_t label = 0;
        for (const auto& n : neighbours) {
          const long nz = z + n.dz, ny = y + n.dy, nx = x + n.dx;
          if (nz < 0 || ny < 0 || nx < 0 || ny >= H || nx >= W) continue;
          const std::uint32_t other = out.labels[static_cast<std::size_t>((nz * H + ny) * W + nx)];
          if (other == 0) continue;
          if (label == 0) {
            label = other;
          } else {
            uf.unite(label, other);
          }
        }
        out.labels[i] = label != 0 ? label : uf.make();
      }

  // Resolve to final labels numbered by first encounter.
  std::vector<std::uint32_t> final_label;
  for (auto& l : out.labels) {
    if (l == 0) continue;
    const std::uint32_t root = uf.find(l);
    if (root >= final_label.size()) final_label.resize(root + 1, 0);
    if (final_label[root] == 0) final_label[root] = ++out.num_objects;
    l = final_label[root];
  }
  return out;
}

std::uint32_t count_mask(const VolumeTensor& mask, Connectivity connectivity) {
  return label_components_3d(mask, connectivity).num_objects;
}

std::vector<double> get_diameters(const VolumeTensor& mask, const Spacing& spacing,
                                  LengthUnit unit, Connectivity connectivity) {
  const ComponentLabels cc = label_components_3d(mask, connectivity);
  std::vector<BoundingBox> boxes(cc.num_objects);
  const Dims& dims = mask.dims();
  std::size_t i = 0;
  for (std::size_t z = 0; z < dims.d; ++z)
    for (std::size_t y = 0; y < dims.h; ++y)
      for (std::size_t x = 0; x < dims.w; ++x, ++i) {
        if (cc.labels[i] != 0) boxes[cc.labels[i] - 1].add(z, y, x);
      }
  const std::array<double, 3> scale =
      unit == LengthUnit::kVoxel ? std::array<double, 3>{1.0, 1.0, 1.0}
                                 : std::array<double, 3>{spacing.z, spacing.y, spacing.x};
  std::vector<double> out;
  out.reserve(boxes.size());
  for (const auto& box : boxes) {
    double d = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      d = std::max(d, static_cast<double>(box.extent(axis)) * scale[axis]);
    }
    out.push_back(d);
  }
  return out;
}

double organ_volume(const VolumeTensor& mask, const Spacing& spacing) {
  return static_cast<double>(mask.count_positive()) * spacing.voxel_volume() / 1000.0;
}

std::string lesion_location(const std::string& lesion_name, const VolumeTensor& lesion_mask,
                            const RegionMaskSet& regions) {
  if (const auto id = region_from_name(lesion_name)) {
    return std::string(region_info(*id).name);
  }
  const auto lesion = lesion_mask.data();
  int best = 0;
  std::size_t best_overlap = 0;
  for (const auto& info : kRegions) {
    const VolumeTensor& region = regions.region(info.id);
    if (region.dims() != lesion_mask.dims()) {
      throw Error(ErrorCode::kDimsMismatch, "lesion and region masks differ in dims");
    }
    const auto r = region.data();
    std::size_t overlap = 0;
    for (std::size_t i = 0; i < lesion.size(); ++i) overlap += lesion[i] != 0.0f && r[i] != 0.0f;
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = info.id;
    }
  }
  return best == 0 ? std::string(kUnspecifiedLocation) : std::string(region_info(best).name);
}

PatientAttributes extract_attributes(const RegionMaskSet& masks, const Spacing& spacing,
                                     const AttributeOptions& options) {
  PatientAttributes attrs;
  attrs.spacing = spacing;
  attrs.diameter_unit = options.diameter_unit;
  for (const auto& [name, mask] : masks.organs) {
    attrs.organ_volumes_ml[name] = organ_volume(mask, spacing);
  }
  for (const auto& [name, mask] : masks.lesions) {
    LesionStats stats;
    stats.diameters = get_diameters(mask, spacing, options.diameter_unit, options.connectivity);
    stats.count = static_cast<std::uint32_t>(stats.diameters.size());
    stats.location = lesion_location(name, mask, masks);
    attrs.lesions.emplace(name, std::move(stats));
  }
  return attrs;
}

namespace {

const char* diameter_key(LengthUnit unit) {
  return unit == LengthUnit::kVoxel ? "diameters_voxel" : "diameters_mm";
}

}  // namespace

Json attributes_to_json(const PatientAttributes& attrs) {
  Json doc;
  Json organs = Json::object();
  for (const auto& [name, ml] : attrs.organ_volumes_ml) organs[name] = ml;
  doc["organ_volumes_ml"] = organs;
  Json lesions = Json::object();
  for (const auto& [name, stats] : attrs.lesions) {
    lesions[name] = {{"count", stats.count},
                     {diameter_key(attrs.diameter_unit), stats.diameters},
                     {"location", stats.location}};
  }
  doc["lesions"] = lesions;
  doc["spacing_mm"] = {attrs.spacing.z, attrs.spacing.y, attrs.spacing.x};
  doc["diameter_unit"] = attrs.diameter_unit == LengthUnit::kVoxel ? "voxel" : "mm";
  return doc;
}

PatientAttributes attributes_from_json(const Json& doc) {
  PatientAttributes attrs;
  try {
    if (doc.value("diameter_unit", std::string("mm")) == "voxel") {
      attrs.diameter_unit = LengthUnit::kVoxel;
    }
    for (const auto& [name, ml] : doc.at("organ_volumes_ml").items()) {
      attrs.organ_volumes_ml[name] = ml.get<double>();
    }
    for (const auto& [name, entry] : doc.at("lesions").items()) {
      LesionStats stats;
      stats.count = entry.at("count").get<std::uint32_t>();
      stats.diameters = entry.at(diameter_key(attrs.diameter_unit)).get<std::vector<double>>();
      stats.location = entry.at("location").get<std::string>();
      if (stats.count != stats.diameters.size()) {
        throw Error(ErrorCode::kSchemaViolation, "lesion '" + name + "': count != diameter count");
      }
      attrs.lesions.emplace(name, std::move(stats));
    }
    const auto sp = doc.at("spacing_mm").get<std::vector<double>>();
    if (sp.size() != 3) throw Error(ErrorCode::kSchemaViolation, "'spacing_mm' needs 3 entries");
    attrs.spacing = {sp[0], sp[1], sp[2]};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("attributes JSON: ") + e.what());
  }
  return attrs;
}

}  // namespace medregion
