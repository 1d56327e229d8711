#include "medregion/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "medregion/file_util.hpp"
#include "medregion/volume_io.hpp"

namespace medregion {

namespace fs = std::filesystem;

namespace {

// Point in normalised voxel-centre coordinates, each axis in (0,1).
struct P {
  double z, y, x;
};

using Shape = std::function<bool(const P&)>;

class Jitter {
 public:
  explicit Jitter(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 rng_;
};

Shape ellipsoid(P c, P r) {
  return [=](const P& p) {
    const double a = (p.z - c.z) / r.z, b = (p.y - c.y) / r.y, d = (p.x - c.x) / r.x;
    return a * a + b * b + d * d <= 1.0;
  };
}

Shape cylinder_z(double cy, double cx, double r, double z0, double z1) {
  return [=](const P& p) {
    const double a = p.y - cy, b = p.x - cx;
    return p.z >= z0 && p.z <= z1 && a * a + b * b <= r * r;
  };
}

Shape unite(Shape a, Shape b) {
  return [=](const P& p) { return a(p) || b(p); };
}

VolumeTensor rasterize(const Shape& s, const Dims& dims, const Spacing& sp) {
  std::vector<float> data(dims.count(), 0.0f);
  std::size_t i = 0;
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x, ++i) {
        const P p{(z + 0.5) / dims.d, (y + 0.5) / dims.h, (x + 0.5) / dims.w};
        data[i] = s(p) ? 1.0f : 0.0f;
      }
    }
  }
  return VolumeTensor(dims, sp, DType::kUInt8, VolumeKind::kMask, std::move(data));
}

// Sphere of physical radius `radius_mm` around a normalised centre.
Shape sphere_mm(P c, double radius_mm, const Dims& dims, const Spacing& sp) {
  return ellipsoid(c, {radius_mm / (sp.z * dims.d), radius_mm / (sp.y * dims.h),
                       radius_mm / (sp.x * dims.w)});
}

}  // namespace

Study make_phantom(const PhantomOptions& o) {
  Jitter j(o.seed);
  const Dims& dims = o.dims;
  const Spacing& sp = o.spacing;
  auto jit = [&](double v) { return v + j.uniform(-0.02, 0.02); };
  auto scale = [&](double v) { return v * j.uniform(0.9, 1.1); };

  const Shape body = [](const P& p) {
    const double a = (p.y - 0.5) / 0.42, b = (p.x - 0.5) / 0.46;
    return a * a + b * b <= 1.0;
  };
  const Shape lung_l = ellipsoid({jit(0.45), jit(0.45), jit(0.29)}, {scale(0.38), scale(0.25), scale(0.14)});
  const Shape lung_r = ellipsoid({jit(0.45), jit(0.45), jit(0.71)}, {scale(0.38), scale(0.25), scale(0.14)});
  const Shape lungs = unite(lung_l, lung_r);
  const Shape trachea = cylinder_z(jit(0.36), 0.5, 0.035, 0.0, 0.35);
  const Shape heart = ellipsoid({jit(0.62), jit(0.52), jit(0.55)}, {scale(0.17), scale(0.15), scale(0.13)});
  const Shape aorta = cylinder_z(0.50, 0.47, 0.035, 0.12, 0.55);
  const Shape spine = cylinder_z(jit(0.80), 0.5, scale(0.06), 0.0, 1.0);
  const Shape liver = ellipsoid({0.95, jit(0.52), jit(0.36)}, {scale(0.17), scale(0.26), scale(0.22)});
  const Shape kidney = ellipsoid({0.95, jit(0.72), jit(0.68)}, {0.08, 0.06, 0.05});
  const Shape mediastinum = [=](const P& p) {
    return p.z >= 0.08 && p.z <= 0.78 && p.y >= 0.28 && p.y <= 0.72 && p.x >= 0.43 &&
           p.x <= 0.57 && !lungs(p);
  };
  const Shape nodule_a = sphere_mm({jit(0.40), 0.46, 0.28}, scale(10.0), dims, sp);
  const Shape nodule_b = sphere_mm({jit(0.55), 0.48, 0.72}, scale(8.0), dims, sp);
  const Shape cyst = sphere_mm({0.93, 0.50, 0.34}, scale(14.0), dims, sp);

  Study study;
  study.id = o.id;
  RegionMaskSet& m = study.masks;
  m.ct_dims = dims;
  m.ct_spacing = sp;
  m.regions[0] = rasterize(lungs, dims, sp);
  m.regions[1] = rasterize(trachea, dims, sp);
  m.regions[2] = rasterize(mediastinum, dims, sp);
  m.regions[3] = rasterize(unite(heart, aorta), dims, sp);
  m.regions[4] = rasterize(spine, dims, sp);
  m.regions[5] = rasterize(unite(liver, kidney), dims, sp);
  m.organs.emplace("lung", m.regions[0]);
  m.organs.emplace("heart", rasterize(heart, dims, sp));
  m.organs.emplace("liver", rasterize(liver, dims, sp));
  m.organs.emplace("kidney", rasterize(kidney, dims, sp));
  m.lesions.emplace("lung_nodule", rasterize(unite(nodule_a, nodule_b), dims, sp));
  m.lesions.emplace("liver_cyst", rasterize(cyst, dims, sp));

  // Later entries overwrite earlier ones.
  const std::vector<std::pair<Shape, double>> layers{
      {body, 40.0},     {mediastinum, -80.0}, {lungs, -850.0}, {trachea, -1000.0},
      {heart, 45.0},    {aorta, 180.0},       {spine, 700.0},  {liver, 60.0},
      {kidney, 35.0},   {nodule_a, 30.0},     {nodule_b, 30.0}, {cyst, 5.0}};
  std::vector<float> ct(dims.count());
  std::size_t i = 0;
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x, ++i) {
        const P p{(z + 0.5) / dims.d, (y + 0.5) / dims.h, (x + 0.5) / dims.w};
        double hu = -1000.0;
        for (const auto& [shape, value] : layers) {
          if (shape(p)) hu = value;
        }
        hu += std::round(j.uniform(-12.0, 12.0));
        ct[i] = static_cast<float>(std::clamp(hu, -1024.0, 3071.0));
      }
    }
  }
  study.ct = VolumeTensor(dims, sp, DType::kInt16, VolumeKind::kImage, std::move(ct));
  return study;
}

fs::path write_phantom(const Study& study, const fs::path& dir) {
  fs::create_directories(dir);
  Json manifest;
  manifest["id"] = study.id;
  manifest["ct"] = "ct.nii";
  save_nifti(study.ct, dir / "ct.nii");
  Json regions = Json::object();
  for (const auto& r : kRegions) {
    const std::string file = "region_" + std::string(r.key) + ".nii.gz";
    save_nifti(study.masks.region(r.id), dir / file);
    regions[std::to_string(r.id)] = file;
  }
  manifest["regions"] = regions;
  Json organs = Json::object();
  for (const auto& [name, mask] : study.masks.organs) {
    const std::string file = "organ_" + name + ".nii.gz";
    save_nifti(mask, dir / file);
    organs[name] = file;
  }
  manifest["organs"] = organs;
  Json lesions = Json::object();
  for (const auto& [name, mask] : study.masks.lesions) {
    const std::string file = "lesion_" + name + ".json";
    save_raw_container(mask, dir / file);
    lesions[name] = file;
  }
  manifest["lesions"] = lesions;
  const fs::path manifest_path = dir / "manifest.json";
  write_json_file(manifest_path, manifest);
  return manifest_path;
}

}  // namespace medregion
