#include "medregion/r2_pool.hpp"

#include <cstdlib>
#include <string>

#include "medregion/error.hpp"
#include "medregion/file_util.hpp"
#include "medregion/windows.hpp"

namespace medregion {

namespace fs = std::filesystem;

Matrix global_tokens(const SliceFeatureStack& features, int level_id) {
  const FeatureLevel& lvl = features.level(level_id);
  const std::size_t D = features.depth();
  const std::size_t T = features.tokens_per_slice();
  const std::size_t C = features.channels();
  Matrix out(D, C);
  if (T == 0) return out;
  std::vector<double> acc(C);
  for (std::size_t d = 0; d < D; ++d) {
    const auto tokens = features.slice_tokens(lvl, d);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) acc[c] += tokens[t * C + c];
    for (std::size_t c = 0; c < C; ++c) {
      out.at(d, c) = static_cast<float>(acc[c] / static_cast<double>(T));
    }
  }
  return out;
}

std::vector<SliceSelection> select_region_slices(const RegionMaskSet& masks) {
  std::vector<SliceSelection> out;
  out.reserve(kNumRegions);
  for (const auto& info : kRegions) {
    const VolumeTensor& mask = masks.region(info.id);
    const std::size_t D = mask.dims().d;
    std::size_t best = D / 2;
    std::size_t best_count = 0;
    for (std::size_t z = 0; z < D; ++z) {
      std::size_t count = 0;
      for (float v : mask.slice(z)) count += v != 0.0f;
      // Strict comparison keeps the lowest index on ties.
      if (count > best_count) {
        best_count = count;
        best = z;
      }
    }
    out.push_back({info.id, best});
  }
  return out;
}

Grid pooled_grid(const Grid& grid, std::size_t n) {
  if (n == 0) return {0, 0};
  Grid best{0, 0};
  // Distance |oh/ow - gh/gw| kept as the fraction num/den.
  long long best_num = 0, best_den = 1;
  const auto gh = static_cast<long long>(grid.gh);
  const auto gw = static_cast<long long>(grid.gw);
  for (std::size_t oh = 1; oh <= n; ++oh) {
    if (n % oh != 0) continue;
    const auto h = static_cast<long long>(oh);
    const auto w = static_cast<long long>(n / oh);
    const long long num = std::llabs(h * gw - gh * w);
    const long long den = w * gw;
    if (best.gh == 0 || num * best_den < best_num * den) {
      best = {oh, n / oh};
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

Matrix adaptive_pool_slice(std::span<const float> tokens, std::size_t channels,
                           const Grid& grid, std::size_t factor) {
  const std::size_t T = grid.size();
  if (tokens.size() != T * channels) {
    throw Error(ErrorCode::kInvalidArgument,
                "token block holds " + std::to_string(tokens.size()) + " values, grid needs " +
                    std::to_string(T * channels));
  }
  if (factor == 0 || T % factor != 0) {
    throw Error(ErrorCode::kNonDivisibleFactor,
                "pooling factor " + std::to_string(factor) + " does not divide T=" +
                    std::to_string(T));
  }
  const Grid out_grid = pooled_grid(grid, T / factor);
  Matrix out(out_grid.size(), channels);
  std::vector<double> acc(channels);
  for (std::size_t i = 0; i < out_grid.gh; ++i) {
    const Window wy = adaptive_window(i, grid.gh, out_grid.gh);
    for (std::size_t j = 0; j < out_grid.gw; ++j) {
      const Window wx = adaptive_window(j, grid.gw, out_grid.gw);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t y = wy.begin; y < wy.end; ++y)
        for (std::size_t x = wx.begin; x < wx.end; ++x) {
          const float* tok = tokens.data() + (y * grid.gw + x) * channels;
          for (std::size_t c = 0; c < channels; ++c) acc[c] += tok[c];
        }
      const double n = static_cast<double>((wy.end - wy.begin) * (wx.end - wx.begin));
      auto row = out.row(i * out_grid.gw + j);
      for (std::size_t c = 0; c < channels; ++c) row[c] = static_cast<float>(acc[c] / n);
    }
  }
  return out;
}

Matrix region_tokens(const SliceFeatureStack& features,
                     const std::vector<SliceSelection>& selected, int level_id) {
  const FeatureLevel& lvl = features.level(level_id);
  const std::size_t C = features.channels();
  const std::size_t s = selected.size();
  if (s == 0) return Matrix(0, C);
  Matrix out(features.tokens_per_slice(), C);
  std::size_t row = 0;
  for (const auto& sel : selected) {
    if (sel.slice >= features.depth()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "selected slice " + std::to_string(sel.slice) + " outside depth " +
                      std::to_string(features.depth()));
    }
    const Matrix pooled = adaptive_pool_slice(features.slice_tokens(lvl, sel.slice), C, lvl.grid, s);
    std::copy(pooled.data.begin(), pooled.data.end(), out.data.begin() + row * C);
    row += pooled.rows;
  }
  return out;
}

TokenSequence assemble_visual_tokens(Matrix global, Matrix region,
                                     const std::vector<SliceSelection>& selected) {
  if (region.rows > 0 && global.rows > 0 && global.cols != region.cols) {
    throw Error(ErrorCode::kChannelMismatch,
                "global tokens have " + std::to_string(global.cols) + " channels, region tokens " +
                    std::to_string(region.cols));
  }
  if (region.rows > 0 && (selected.empty() || region.rows % selected.size() != 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::to_string(region.rows) + " region tokens cannot be split over " +
                    std::to_string(selected.size()) + " selected slices");
  }
  TokenSequence seq;
  seq.layout.reserve(global.rows + region.rows);
  for (std::size_t d = 0; d < global.rows; ++d) {
    seq.layout.push_back({TokenKind::kGlobal, d, 0});
  }
  if (region.rows > 0) {
    const std::size_t per_slice = region.rows / selected.size();
    for (const auto& sel : selected) {
      for (std::size_t k = 0; k < per_slice; ++k) {
        seq.layout.push_back({TokenKind::kRegion, sel.slice, sel.region_id});
      }
    }
  }
  if (region.rows == 0) region.cols = global.cols;
  seq.global = std::move(global);
  seq.region = std::move(region);
  seq.selected_slices = selected;
  return seq;
}

TokenSequence r2_token_pooling(const SliceFeatureStack& features,
                               const std::vector<SliceSelection>& selected, int level_id) {
  TokenSequence seq = assemble_visual_tokens(global_tokens(features, level_id),
                                             region_tokens(features, selected, level_id), selected);
  seq.level_id = level_id;
  return seq;
}

TokenSequence r2_token_pooling(const SliceFeatureStack& features,
                               const std::vector<SliceSelection>& selected) {
  return r2_token_pooling(features, selected, features.final_level().level_id);
}

fs::path layout_sidecar_path(const fs::path& header_path) {
  fs::path p = header_path;
  p.replace_extension(".layout.json");
  return p;
}

void save_token_sequence(const TokenSequence& seq, const fs::path& header_path) {
  const std::size_t n = seq.size();
  FeatureLevel lvl{seq.level_id, {1, n}, {}};
  lvl.tokens.reserve(n * seq.channels());
  lvl.tokens.insert(lvl.tokens.end(), seq.global.data.begin(), seq.global.data.end());
  lvl.tokens.insert(lvl.tokens.end(), seq.region.data.begin(), seq.region.data.end());
  save_features(SliceFeatureStack(1, n, seq.channels(), {std::move(lvl)}), header_path);

  Json side;
  side["study_id"] = seq.study_id;
  side["level_id"] = seq.level_id;
  side["global_count"] = seq.global.rows;
  side["region_count"] = seq.region.rows;
  Json sel = Json::array();
  for (const auto& s : seq.selected_slices) {
    sel.push_back({{"region", s.region_id}, {"slice", s.slice}});
  }
  side["selected_slices"] = sel;
  Json layout = Json::array();
  for (const auto& p : seq.layout) {
    layout.push_back({{"kind", p.kind == TokenKind::kGlobal ? "global" : "region"},
                      {"slice", p.source_slice},
                      {"region", p.source_region}});
  }
  side["layout"] = layout;
  write_file_atomic(layout_sidecar_path(header_path), side.dump() + "\n");
}

TokenSequence load_token_sequence(const fs::path& header_path) {
  const SliceFeatureStack stack = load_precomputed_features(header_path);
  const Json side = read_json_file(layout_sidecar_path(header_path));
  try {
    const auto global_count = side.at("global_count").get<std::size_t>();
    const auto region_count = side.at("region_count").get<std::size_t>();
    if (stack.depth() != 1 || global_count + region_count != stack.tokens_per_slice()) {
      throw Error(ErrorCode::kSchemaViolation, "layout counts disagree with the token container");
    }
    const std::size_t C = stack.channels();
    const auto& tokens = stack.levels().front().tokens;
    TokenSequence seq;
    seq.study_id = side.value("study_id", std::string());
    seq.level_id = side.at("level_id").get<int>();
    seq.global = Matrix(global_count, C);
    seq.region = Matrix(region_count, C);
    std::copy(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(global_count * C),
              seq.global.data.begin());
    std::copy(tokens.begin() + static_cast<std::ptrdiff_t>(global_count * C), tokens.end(),
              seq.region.data.begin());
    for (const auto& s : side.at("selected_slices")) {
      seq.selected_slices.push_back({s.at("region").get<int>(), s.at("slice").get<std::size_t>()});
    }
    for (const auto& p : side.at("layout")) {
      const auto kind = p.at("kind").get<std::string>();
      if (kind != "global" && kind != "region") {
        throw Error(ErrorCode::kSchemaViolation, "layout kind must be 'global' or 'region'");
      }
      seq.layout.push_back({kind == "global" ? TokenKind::kGlobal : TokenKind::kRegion,
                            p.at("slice").get<std::size_t>(), p.at("region").get<int>()});
    }
    if (seq.layout.size() != seq.size()) {
      throw Error(ErrorCode::kSchemaViolation, "layout has one record per token");
    }
    return seq;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation,
                layout_sidecar_path(header_path).string() + ": " + e.what());
  }
}

}  // namespace medregion
