#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "medregion/encoder.hpp"
#include "medregion/volume.hpp"

namespace medregion {

// Representative slice chosen for one region.
struct SliceSelection {
  int region_id = 0;
  std::size_t slice = 0;
  friend bool operator==(const SliceSelection&, const SliceSelection&) = default;
};

enum class TokenKind { kGlobal, kRegion };

// Where one visual token came from. source_region is 0 for global tokens.
struct TokenProvenance {
  TokenKind kind = TokenKind::kGlobal;
  std::size_t source_slice = 0;
  int source_region = 0;
  friend bool operator==(const TokenProvenance&, const TokenProvenance&) = default;
};

// D global tokens followed by T region tokens.
struct TokenSequence {
  std::string study_id;
  int level_id = 0;
  Matrix global;   // D x C
  Matrix region;   // T x C
  std::vector<SliceSelection> selected_slices;
  std::vector<TokenProvenance> layout;

  std::size_t size() const { return global.rows + region.rows; }
  std::size_t channels() const { return global.cols; }
  // Row k of the concatenated sequence.
  std::span<const float> token(std::size_t k) const {
    return k < global.rows ? global.row(k) : region.row(k - global.rows);
  }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// One token per slice: the mean over that slice's T tokens. Throws UnknownLevel.
Matrix global_tokens(const SliceFeatureStack& features, int level_id);

// For each region in canonical order, the slice with the most mask-positive
// voxels; ties go to the lowest index, empty masks to floor(D/2).
std::vector<SliceSelection> select_region_slices(const RegionMaskSet& masks);

// Output grid (oh, ow) with oh*ow == n whose aspect ratio is closest to
// gh/gw; ties go to the smaller oh.
Grid pooled_grid(const Grid& grid, std::size_t n);

// 2D adaptive average pooling of a (gh x gw) x C token grid down to T/s
// tokens. Throws NonDivisibleFactor unless s divides T.
Matrix adaptive_pool_slice(std::span<const float> tokens, std::size_t channels,
                           const Grid& grid, std::size_t factor);

// Pooled tokens of every selected slice, concatenated in selection order; the
// pooling factor is the number of selections. Exactly T rows.
Matrix region_tokens(const SliceFeatureStack& features,
                     const std::vector<SliceSelection>& selected, int level_id);

// Concat(global, region) with provenance records. Throws ChannelMismatch.
TokenSequence assemble_visual_tokens(Matrix global, Matrix region,
                                     const std::vector<SliceSelection>& selected);

// The full pooling chain on one level (the final one unless given).
TokenSequence r2_token_pooling(const SliceFeatureStack& features,
                               const std::vector<SliceSelection>& selected);
TokenSequence r2_token_pooling(const SliceFeatureStack& features,
                               const std::vector<SliceSelection>& selected, int level_id);

// Serialized as a one-slice feature container holding all D+T tokens, plus a
// <name>.layout.json sidecar with the provenance records.
void save_token_sequence(const TokenSequence& seq, const std::filesystem::path& header_path);
TokenSequence load_token_sequence(const std::filesystem::path& header_path);
std::filesystem::path layout_sidecar_path(const std::filesystem::path& header_path);

}  // namespace medregion
