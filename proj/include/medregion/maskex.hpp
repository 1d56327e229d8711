#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "medregion/encoder.hpp"
#include "medregion/r2_pool.hpp"
#include "medregion/volume.hpp"

namespace medregion {

// y = W x + b with W stored row-major as out x in.
struct LinearMap {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  std::vector<float> apply(std::span<const float> x) const;
  friend bool operator==(const LinearMap&, const LinearMap&) = default;
};

struct SpatialGrid {
  std::size_t gd = 8;
  std::size_t gh = 16;
  std::size_t gw = 16;

  std::size_t size() const { return gd * gh * gw; }
  friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;
};

// Untrained projections: mask_proj maps the L*C concatenated pooled features
// to C, spatial_proj maps the G flattened mask cells to C.
struct ProjectionWeights {
  std::vector<int> level_ids;
  std::size_t channels = 0;
  SpatialGrid spatial_grid;
  std::uint64_t seed = 0;
  LinearMap mask_proj;
  LinearMap spatial_proj;

  std::size_t levels() const { return level_ids.size(); }
  friend bool operator==(const ProjectionWeights&, const ProjectionWeights&) = default;
};

// Deterministic pseudo-random weights, uniform in +-1/sqrt(fan_in), drawn from
// a SplitMix64 stream so the values do not depend on the standard library.
ProjectionWeights make_projection_weights(const std::vector<int>& level_ids,
                                          std::size_t channels, const SpatialGrid& grid,
                                          std::uint64_t seed);

// JSON header {L, C, G, seed, level_ids, spatial_grid} + <name>.bin holding
// mask_proj weight, mask_proj bias, spatial_proj weight, spatial_proj bias.
void save_projection_weights(const ProjectionWeights& w, const std::filesystem::path& header_path);
ProjectionWeights load_projection_weights(const std::filesystem::path& header_path);

// Per level, one coverage fraction for each of the D+T pooled visual tokens.
struct MaskFractions {
  std::vector<std::vector<float>> per_level;
};

// Aligns a mask with the pooled token sequence: global entries are whole-slice
// positive fractions, region entries are per-token patch fractions of the
// selected slice pooled with adaptive_pool_slice. Throws DimsMismatch.
MaskFractions pool_mask_r2(const VolumeTensor& mask, std::span<const Grid> grids,
                           const std::vector<SliceSelection>& selection, std::size_t factor);

// The D+T pooled tokens of every level, in level order.
std::vector<Matrix> r2_pool_all_levels(const SliceFeatureStack& features,
                                       const std::vector<SliceSelection>& selection);

// Fraction-weighted mean of each level's tokens, concatenated over levels
// (L*C values). A level with zero total weight contributes zeros.
// Throws LevelMismatch when the fractions do not line up with the tokens.
std::vector<float> mask_pool(const std::vector<Matrix>& level_tokens,
                             const MaskFractions& fractions);

std::vector<float> mask_token(const std::vector<Matrix>& level_tokens,
                              const MaskFractions& fractions, const ProjectionWeights& weights);

// Binary (gd, gh, gw) occupancy: a cell is 1 when at least half of the voxels
// in its window are positive. Flattened row-major.
std::vector<float> downsample_mask(const VolumeTensor& mask, const SpatialGrid& grid);

std::vector<float> spatial_token(const VolumeTensor& mask, const ProjectionWeights& weights);

struct SegmentationEntry {
  int region_id = 0;
  std::vector<float> mask_token;
  std::vector<float> spatial_token;
  bool positive = false;
  friend bool operator==(const SegmentationEntry&, const SegmentationEntry&) = default;
};

// Six entries in canonical region order, present even for empty masks.
struct SegmentationTokenSet {
  std::string study_id;
  std::vector<SegmentationEntry> entries;

  std::size_t token_count() const { return 2 * entries.size(); }
  friend bool operator==(const SegmentationTokenSet&, const SegmentationTokenSet&) = default;
};

SegmentationTokenSet segmentation_tokens(const RegionMaskSet& masks,
                                         const SliceFeatureStack& features,
                                         const std::vector<SliceSelection>& selection,
                                         const ProjectionWeights& weights);

void save_segmentation_tokens(const SegmentationTokenSet& set, const std::filesystem::path& path);
SegmentationTokenSet load_segmentation_tokens(const std::filesystem::path& path);

}  // namespace medregion
