#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "medregion/volume.hpp"

namespace medregion {

// Token grid of one slice: gh rows by gw columns.
struct Grid {
  std::size_t gh = 0;
  std::size_t gw = 0;

  std::size_t size() const { return gh * gw; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

// Row-major 2D float array.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  float& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  float at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Tokens of one encoder layer, laid out (slice, token, channel).
struct FeatureLevel {
  int level_id = 0;
  Grid grid;
  std::vector<float> tokens;
};

class SliceFeatureStack {
 public:
  SliceFeatureStack() = default;
  // Throws LevelShapeMismatch unless every level holds D*T*C values on a grid
  // with gh*gw == T.
  SliceFeatureStack(std::size_t depth, std::size_t tokens_per_slice,
                    std::size_t channels, std::vector<FeatureLevel> levels);

  std::size_t depth() const { return depth_; }
  std::size_t tokens_per_slice() const { return tokens_; }
  std::size_t channels() const { return channels_; }
  const std::vector<FeatureLevel>& levels() const { return levels_; }
  const FeatureLevel& final_level() const { return levels_.back(); }

  // Throws UnknownLevel.
  const FeatureLevel& level(int level_id) const;

  // T x C view of the tokens of slice `d` at `lvl`.
  std::span<const float> slice_tokens(const FeatureLevel& lvl, std::size_t d) const {
    return std::span<const float>(lvl.tokens).subspan(d * tokens_ * channels_,
                                                      tokens_ * channels_);
  }

  friend bool operator==(const SliceFeatureStack& a, const SliceFeatureStack& b);

 private:
  std::size_t depth_ = 0;
  std::size_t tokens_ = 0;
  std::size_t channels_ = 0;
  std::vector<FeatureLevel> levels_;
};

struct EncoderConfig {
  Grid grid{18, 18};
  std::size_t channels = 64;
  std::vector<int> level_ids{3, 6, 9, 12};
};

// Deterministic stand-in for a frozen 2D encoder. Token (i,j) of slice d:
// channel 0 = mean of its patch, channel 1 = population standard deviation,
// channels >= 2 = sinusoidal encodings of (d, i, j, level_id). Patch windows
// follow the adaptive-pooling rule, so H need not be divisible by gh.
// Throws GridTooFine when gh > H or gw > W.
SliceFeatureStack stub_encode_volume(const VolumeTensor& vol, const EncoderConfig& cfg);

// Value of positional channel `channel` (>= 2) for the given coordinates.
float positional_channel(std::size_t channel, std::size_t channels, std::size_t slice,
                         std::size_t row, std::size_t col, int level_id);

// Feature container: <name>.json header {"D","T","C","levels":[{"id","grid"}]}
// plus one little-endian float32 blob per level at <name>.level<k>.bin.
SliceFeatureStack load_precomputed_features(const std::filesystem::path& header_path);
void save_features(const SliceFeatureStack& stack, const std::filesystem::path& header_path);
std::filesystem::path level_blob_path(const std::filesystem::path& header_path,
                                      std::size_t level_index);

}  // namespace medregion
