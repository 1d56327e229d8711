#include "medregion/maskex.hpp"

#include <cmath>

#include "medregion/error.hpp"
#include "medregion/file_util.hpp"
#include "medregion/windows.hpp"

namespace medregion {

namespace fs = std::filesystem;

namespace {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [-1, 1).
  double symmetric() { return static_cast<double>(next() >> 11) * 0x1.0p-52 - 1.0; }

 private:
  std::uint64_t state_;
};

LinearMap random_linear(std::size_t in, std::size_t out, SplitMix64& rng) {
  LinearMap m{in, out, std::vector<float>(in * out), std::vector<float>(out)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (float& w : m.weight) w = static_cast<float>(bound * rng.symmetric());
  for (float& b : m.bias) b = static_cast<float>(bound * rng.symmetric());
  return m;
}

std::vector<float> json_floats(const Json& j, const char* key, std::size_t n) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != n) {
    throw Error(ErrorCode::kSchemaViolation,
                std::string("'") + key + "' must hold " + std::to_string(n) + " numbers");
  }
  std::vector<float> out;
  out.reserve(n);
  for (const auto& v : arr) out.push_back(v.get<float>());
  return out;
}

}  // namespace

std::vector<float> LinearMap::apply(std::span<const float> x) const {
  if (x.size() != in) {
    throw Error(ErrorCode::kInvalidArgument,
                "linear map expects " + std::to_string(in) + " inputs, got " +
                    std::to_string(x.size()));
  }
  std::vector<float> y(out);
  for (std::size_t r = 0; r < out; ++r) {
    double acc = bias[r];
    const float* w = weight.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += static_cast<double>(w[c]) * x[c];
    y[r] = static_cast<float>(acc);
  }
  return y;
}

ProjectionWeights make_projection_weights(const std::vector<int>& level_ids,
                                          std::size_t channels, const SpatialGrid& grid,
                                          std::uint64_t seed) {
  if (level_ids.empty() || channels == 0 || grid.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "projection weights need L, C and G >= 1");
  }
  SplitMix64 rng(seed);
  ProjectionWeights w;
  w.level_ids = level_ids;
  w.channels = channels;
  w.spatial_grid = grid;
  w.seed = seed;
  w.mask_proj = random_linear(level_ids.size() * channels, channels, rng);
  w.spatial_proj = random_linear(grid.size(), channels, rng);
  return w;
}

void save_projection_weights(const ProjectionWeights& w, const fs::path& header_path) {
  Json hdr;
  hdr["L"] = w.levels();
  hdr["C"] = w.channels;
  hdr["G"] = w.spatial_grid.size();
  hdr["seed"] = w.seed;
  hdr["level_ids"] = w.level_ids;
  hdr["spatial_grid"] = {w.spatial_grid.gd, w.spatial_grid.gh, w.spatial_grid.gw};
  std::vector<std::uint8_t> blob;
  append_f32_le(blob, w.mask_proj.weight);
  append_f32_le(blob, w.mask_proj.bias);
  append_f32_le(blob, w.spatial_proj.weight);
  append_f32_le(blob, w.spatial_proj.bias);
  write_file_atomic(sibling_with_extension(header_path, ".bin"), blob);
  write_file_atomic(header_path, hdr.dump() + "\n");
}

ProjectionWeights load_projection_weights(const fs::path& header_path) {
  const Json hdr = read_json_file(header_path);
  ProjectionWeights w;
  std::size_t L = 0, G = 0;
  try {
    L = hdr.at("L").get<std::size_t>();
    w.channels = hdr.at("C").get<std::size_t>();
    G = hdr.at("G").get<std::size_t>();
    w.seed = hdr.at("seed").get<std::uint64_t>();
    w.level_ids = hdr.at("level_ids").get<std::vector<int>>();
    if (hdr.contains("spatial_grid")) {
      const auto g = hdr.at("spatial_grid").get<std::vector<std::size_t>>();
      if (g.size() != 3) throw Error(ErrorCode::kSchemaViolation, "'spatial_grid' needs 3 entries");
      w.spatial_grid = {g[0], g[1], g[2]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, header_path.string() + ": " + e.what());
  }
  if (w.level_ids.size() != L) {
    throw Error(ErrorCode::kSchemaViolation, "'level_ids' must list L entries");
  }
  if (w.spatial_grid.size() != G) {
    throw Error(ErrorCode::kSchemaViolation, "'spatial_grid' does not multiply to G");
  }
  const std::size_t C = w.channels;
  const std::size_t sizes[4] = {C * L * C, C, C * G, C};
  const auto blob = read_file_bytes(sibling_with_extension(header_path, ".bin"));
  if (blob.size() != 4 * (sizes[0] + sizes[1] + sizes[2] + sizes[3])) {
    throw Error(ErrorCode::kTruncatedData, "projection weight blob has the wrong size");
  }
  const auto values = decode_f32_le(blob);
  auto take = [&, offset = std::size_t{0}](std::size_t n) mutable {
    std::vector<float> v(values.begin() + static_cast<std::ptrdiff_t>(offset),
                         values.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
    return v;
  };
  w.mask_proj = {L * C, C, take(sizes[0]), take(sizes[1])};
  w.spatial_proj = {G, C, take(sizes[2]), take(sizes[3])};
  return w;
}

MaskFractions pool_mask_r2(const VolumeTensor& mask, std::span<const Grid> grids,
                           const std::vector<SliceSelection>& selection, std::size_t factor) {
  if (factor != selection.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "pooling factor " + std::to_string(factor) + " differs from the " +
                    std::to_string(selection.size()) + " selected slices");
  }
  const Dims& dims = mask.dims();
  MaskFractions out;
  const double slice_area = static_cast<double>(dims.slice_size());
  std::vector<float> global(dims.d);
  for (std::size_t z = 0; z < dims.d; ++z) {
    std::size_t n = 0;
    for (float v : mask.slice(z)) n += v != 0.0f;
    global[z] = static_cast<float>(static_cast<double>(n) / slice_area);
  }
  for (const Grid& grid : grids) {
    if (grid.gh < 1 || grid.gw < 1 || grid.gh > dims.h || grid.gw > dims.w) {
      throw Error(ErrorCode::kDimsMismatch, "token grid does not fit the mask slice");
    }
    std::vector<float> fractions = global;
    for (const auto& sel : selection) {
      if (sel.slice >= dims.d) {
        throw Error(ErrorCode::kDimsMismatch, "selected slice outside the mask depth");
      }
      // Patch coverage per token, same windows as the encoder's patches.
      std::vector<float> token_frac(grid.size());
      for (std::size_t i = 0; i < grid.gh; ++i) {
        const Window wy = adaptive_window(i, dims.h, grid.gh);
        for (std::size_t j = 0; j < grid.gw; ++j) {
          const Window wx = adaptive_window(j, dims.w, grid.gw);
          std::size_t n = 0;
          for (std::size_t y = wy.begin; y < wy.end; ++y)
            for (std::size_t x = wx.begin; x < wx.end; ++x) n += mask.at(sel.slice, y, x) != 0.0f;
          const auto area = (wy.end - wy.begin) * (wx.end - wx.begin);
          token_frac[i * grid.gw + j] =
              static_cast<float>(static_cast<double>(n) / static_cast<double>(area));
        }
      }
      const Matrix pooled = adaptive_pool_slice(token_frac, 1, grid, factor);
      fractions.insert(fractions.end(), pooled.data.begin(), pooled.data.end());
    }
    out.per_level.push_back(std::move(fractions));
  }
  return out;
}

std::vector<Matrix> r2_pool_all_levels(const SliceFeatureStack& features,
                                       const std::vector<SliceSelection>& selection) {
  std::vector<Matrix> out;
  for (const auto& lvl : features.levels()) {
    const TokenSequence seq = r2_token_pooling(features, selection, lvl.level_id);
    Matrix m(seq.size(), seq.channels());
    std::copy(seq.global.data.begin(), seq.global.data.end(), m.data.begin());
    std::copy(seq.region.data.begin(), seq.region.data.end(),
              m.data.begin() + static_cast<std::ptrdiff_t>(seq.global.data.size()));
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<float> mask_pool(const std::vector<Matrix>& level_tokens,
                             const MaskFractions& fractions) {
  if (fractions.per_level.size() != level_tokens.size()) {
    throw Error(ErrorCode::kLevelMismatch,
                std::to_string(fractions.per_level.size()) + " fraction levels for " +
                    std::to_string(level_tokens.size()) + " token levels");
  }
  std::vector<float> out;
  for (std::size_t l = 0; l < level_tokens.size(); ++l) {
    const Matrix& tokens = level_tokens[l];
    const auto& frac = fractions.per_level[l];
    if (frac.size() != tokens.rows) {
      throw Error(ErrorCode::kLevelMismatch,
                  "level " + std::to_string(l) + ": " + std::to_string(frac.size()) +
                      " fractions for " + std::to_string(tokens.rows) + " tokens");
    }
    std::vector<double> num(tokens.cols, 0.0);
    double den = 0.0;
    for (std::size_t k = 0; k < tokens.rows; ++k) {
      if (frac[k] == 0.0f) continue;
      const double f = frac[k];
      den += f;
      const auto row = tokens.row(k);
      for (std::size_t c = 0; c < tokens.cols; ++c) num[c] += f * row[c];
    }
    for (std::size_t c = 0; c < tokens.cols; ++c) {
      out.push_back(den > 0.0 ? static_cast<float>(num[c] / den) : 0.0f);
    }
  }
  return out;
}

std::vector<float> mask_token(const std::vector<Matrix>& level_tokens,
                              const MaskFractions& fractions, const ProjectionWeights& weights) {
  if (level_tokens.size() != weights.levels()) {
    throw Error(ErrorCode::kLevelMismatch,
                "weights expect " + std::to_string(weights.levels()) + " levels, got " +
                    std::to_string(level_tokens.size()));
  }
  return weights.mask_proj.apply(mask_pool(level_tokens, fractions));
}

std::vector<float> downsample_mask(const VolumeTensor& mask, const SpatialGrid& grid) {
  const Dims& dims = mask.dims();
  std::vector<float> cells(grid.size(), 0.0f);
  std::size_t o = 0;
  for (std::size_t a = 0; a < grid.gd; ++a) {
    const Window wz = adaptive_window(a, dims.d, grid.gd);
    for (std::size_t b = 0; b < grid.gh; ++b) {
      const Window wy = adaptive_window(b, dims.h, grid.gh);
      for (std::size_t c = 0; c < grid.gw; ++c, ++o) {
        const Window wx = adaptive_window(c, dims.w, grid.gw);
        std::size_t n = 0;
        for (std::size_t z = wz.begin; z < wz.end; ++z)
          for (std::size_t y = wy.begin; y < wy.end; ++y)
            for (std::size_t x = wx.begin; x < wx.end; ++x) n += mask.at(z, y, x) != 0.0f;
        const std::size_t total = (wz.end - wz.begin) * (wy.end - wy.begin) * (wx.end - wx.begin);
        cells[o] = 2 * n >= total ? 1.0f : 0.0f;
      }
    }
  }
  return cells;
}

std::vector<float> spatial_token(const VolumeTensor& mask, const ProjectionWeights& weights) {
  return weights.spatial_proj.apply(downsample_mask(mask, weights.spatial_grid));
}

SegmentationTokenSet segmentation_tokens(const RegionMaskSet& masks,
                                         const SliceFeatureStack& features,
                                         const std::vector<SliceSelection>& selection,
                                         const ProjectionWeights& weights) {
  if (weights.channels != features.channels()) {
    throw Error(ErrorCode::kChannelMismatch,
                "weights have C=" + std::to_string(weights.channels) + ", features C=" +
                    std::to_string(features.channels()));
  }
  std::vector<Grid> grids;
  std::vector<int> ids;
  for (const auto& lvl : features.levels()) {
    grids.push_back(lvl.grid);
    ids.push_back(lvl.level_id);
  }
  if (ids != weights.level_ids) {
    throw Error(ErrorCode::kLevelMismatch, "weight level ids differ from the feature levels");
  }
  const std::vector<Matrix> level_tokens = r2_pool_all_levels(features, selection);
  SegmentationTokenSet set;
  for (const auto& info : kRegions) {
    const VolumeTensor& mask = masks.region(info.id);
    if (mask.dims().d != features.depth()) {
      throw Error(ErrorCode::kDimsMismatch, "mask depth differs from the feature stack depth");
    }
    const MaskFractions frac = pool_mask_r2(mask, grids, selection, selection.size());
    set.entries.push_back({info.id, mask_token(level_tokens, frac, weights),
                           spatial_token(mask, weights), mask.count_positive() > 0});
  }
  return set;
}

void save_segmentation_tokens(const SegmentationTokenSet& set, const fs::path& path) {
  Json doc;
  doc["study_id"] = set.study_id;
  Json entries = Json::array();
  for (const auto& e : set.entries) {
    entries.push_back({{"region", e.region_id},
                       {"positive", e.positive},
                       {"mask_token", e.mask_token},
                       {"spatial_token", e.spatial_token}});
  }
  doc["entries"] = entries;
  write_file_atomic(path, doc.dump() + "\n");
}

SegmentationTokenSet load_segmentation_tokens(const fs::path& path) {
  const Json doc = read_json_file(path);
  SegmentationTokenSet set;
  try {
    set.study_id = doc.value("study_id", std::string());
    for (const auto& e : doc.at("entries")) {
      SegmentationEntry entry;
      entry.region_id = e.at("region").get<int>();
      entry.positive = e.at("positive").get<bool>();
      const std::size_t C = e.at("mask_token").size();
      entry.mask_token = json_floats(e, "mask_token", C);
      entry.spatial_token = json_floats(e, "spatial_token", C);
      set.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kSchemaViolation, path.string() + ": " + ex.what());
  }
  if (set.entries.size() != kNumRegions) {
    throw Error(ErrorCode::kSchemaViolation, "segmentation token file needs 6 entries");
  }
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    if (set.entries[i].region_id != static_cast<int>(i) + 1) {
      throw Error(ErrorCode::kSchemaViolation, "segmentation entries must be in region order 1..6");
    }
  }
  return set;
}

}  // namespace medregion
