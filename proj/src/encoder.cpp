#include "medregion/encoder.hpp"

#include <cmath>
#include <string>

#include "medregion/error.hpp"
#include "medregion/file_util.hpp"
#include "medregion/windows.hpp"

namespace medregion {

namespace fs = std::filesystem;

SliceFeatureStack::SliceFeatureStack(std::size_t depth, std::size_t tokens_per_slice,
                                     std::size_t channels, std::vector<FeatureLevel> levels)
    : depth_(depth), tokens_(tokens_per_slice), channels_(channels), levels_(std::move(levels)) {
  if (levels_.empty()) {
    throw Error(ErrorCode::kLevelShapeMismatch, "feature stack needs at least one level");
  }
  for (const auto& lvl : levels_) {
    const std::string tag = "level " + std::to_string(lvl.level_id);
    if (lvl.grid.gh < 1 || lvl.grid.gw < 1) {
      throw Error(ErrorCode::kLevelShapeMismatch, tag + ": grid dims must be >= 1");
    }
    if (lvl.grid.size() != tokens_) {
      throw Error(ErrorCode::kLevelShapeMismatch,
                  tag + ": grid " + std::to_string(lvl.grid.gh) + "x" +
                      std::to_string(lvl.grid.gw) + " does not hold T=" + std::to_string(tokens_) +
                      " tokens");
    }
    if (lvl.tokens.size() != depth_ * tokens_ * channels_) {
      throw Error(ErrorCode::kLevelShapeMismatch,
                  tag + ": holds " + std::to_string(lvl.tokens.size()) + " values, expected D*T*C = " +
                      std::to_string(depth_ * tokens_ * channels_));
    }
  }
}

const FeatureLevel& SliceFeatureStack::level(int level_id) const {
  for (const auto& lvl : levels_) {
    if (lvl.level_id == level_id) return lvl;
  }
  throw Error(ErrorCode::kUnknownLevel, "no feature level with id " + std::to_string(level_id));
}

bool operator==(const SliceFeatureStack& a, const SliceFeatureStack& b) {
  if (a.depth_ != b.depth_ || a.tokens_ != b.tokens_ || a.channels_ != b.channels_ ||
      a.levels_.size() != b.levels_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.levels_.size(); ++i) {
    const auto& x = a.levels_[i];
    const auto& y = b.levels_[i];
    if (x.level_id != y.level_id || x.grid != y.grid || x.tokens != y.tokens) return false;
  }
  return true;
}

float positional_channel(std::size_t channel, std::size_t channels, std::size_t slice,
                         std::size_t row, std::size_t col, int level_id) {
  const std::size_t k = channel - 2;
  const double coords[4] = {static_cast<double>(slice), static_cast<double>(row),
                            static_cast<double>(col), static_cast<double>(level_id)};
  const double coord = coords[k % 4];
  const std::size_t f = k / 4;
  const std::size_t pairs = channels > 2 ? (channels - 2 + 7) / 8 : 1;
  const double omega =
      std::pow(10000.0, -static_cast<double>(f / 2) / static_cast<double>(pairs));
  return static_cast<float>(f % 2 == 0 ? std::sin(coord * omega) : std::cos(coord * omega));
}

SliceFeatureStack stub_encode_volume(const VolumeTensor& vol, const EncoderConfig& cfg) {
  const Dims& dims = vol.dims();
  const Grid grid = cfg.grid;
  if (grid.gh < 1 || grid.gw < 1 || grid.gh > dims.h || grid.gw > dims.w) {
    throw Error(ErrorCode::kGridTooFine,
                "grid " + std::to_string(grid.gh) + "x" + std::to_string(grid.gw) +
                    " is finer than the " + std::to_string(dims.h) + "x" +
                    std::to_string(dims.w) + " slice");
  }
  if (cfg.channels < 1) throw Error(ErrorCode::kInvalidArgument, "channel count must be >= 1");
  if (cfg.level_ids.empty()) throw Error(ErrorCode::kInvalidArgument, "need at least one level id");

  const std::size_t T = grid.size();
  const std::size_t C = cfg.channels;

  // Patch statistics do not depend on the level.
  std::vector<float> mean(dims.d * T), stdev(dims.d * T);
  for (std::size_t d = 0; d < dims.d; ++d) {
    for (std::size_t i = 0; i < grid.gh; ++i) {
      const Window wy = adaptive_window(i, dims.h, grid.gh);
      for (std::size_t j = 0; j < grid.gw; ++j) {
        const Window wx = adaptive_window(j, dims.w, grid.gw);
        double sum = 0.0;
        for (std::size_t y = wy.begin; y < wy.end; ++y)
          for (std::size_t x = wx.begin; x < wx.end; ++x) sum += vol.at(d, y, x);
        const double n = static_cast<double>((wy.end - wy.begin) * (wx.end - wx.begin));
        const double m = sum / n;
        double sq = 0.0;
        for (std::size_t y = wy.begin; y < wy.end; ++y)
          for (std::size_t x = wx.begin; x < wx.end; ++x) {
            const double dv = vol.at(d, y, x) - m;
            sq += dv * dv;
          }
        mean[d * T + i * grid.gw + j] = static_cast<float>(m);
        stdev[d * T + i * grid.gw + j] = static_cast<float>(std::sqrt(sq / n));
      }
    }
  }

  std::vector<FeatureLevel> levels;
  for (int id : cfg.level_ids) {
    FeatureLevel lvl{id, grid, std::vector<float>(dims.d * T * C)};
    for (std::size_t d = 0; d < dims.d; ++d) {
      for (std::size_t t = 0; t < T; ++t) {
        float* tok = lvl.tokens.data() + (d * T + t) * C;
        tok[0] = mean[d * T + t];
        if (C > 1) tok[1] = stdev[d * T + t];
        for (std::size_t c = 2; c < C; ++c) {
          tok[c] = positional_channel(c, C, d, t / grid.gw, t % grid.gw, id);
        }
      }
    }
    levels.push_back(std::move(lvl));
  }
  return SliceFeatureStack(dims.d, T, C, std::move(levels));
}

fs::path level_blob_path(const fs::path& header_path, std::size_t level_index) {
  fs::path p = header_path;
  p.replace_extension(".level" + std::to_string(level_index) + ".bin");
  return p;
}

namespace {

std::size_t positive_size(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer() || it->get<long long>() < 0) {
    throw Error(ErrorCode::kSchemaViolation,
                std::string("feature header needs a non-negative integer '") + key + "'");
  }
  return it->get<std::size_t>();
}

}  // namespace

SliceFeatureStack load_precomputed_features(const fs::path& header_path) {
  const Json hdr = read_json_file(header_path);
  if (!hdr.is_object()) throw Error(ErrorCode::kSchemaViolation, "feature header must be an object");
  const std::size_t D = positive_size(hdr, "D");
  const std::size_t T = positive_size(hdr, "T");
  const std::size_t C = positive_size(hdr, "C");
  const auto lv = hdr.find("levels");
  if (lv == hdr.end() || !lv->is_array() || lv->empty()) {
    throw Error(ErrorCode::kSchemaViolation, "feature header needs a non-empty 'levels' array");
  }
  std::vector<FeatureLevel> levels;
  for (std::size_t k = 0; k < lv->size(); ++k) {
    const Json& entry = (*lv)[k];
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_number_integer() ||
        !entry.contains("grid") || !entry["grid"].is_array() || entry["grid"].size() != 2 ||
        !entry["grid"][0].is_number_integer() || !entry["grid"][1].is_number_integer()) {
      throw Error(ErrorCode::kSchemaViolation,
                  "level entry " + std::to_string(k) + " needs integer 'id' and 'grid':[gh,gw]");
    }
    // Optional per-level shape overrides must agree with the header.
    for (const char* key : {"T", "C"}) {
      if (entry.contains(key)) {
        if (!entry[key].is_number_unsigned()) {
          throw Error(ErrorCode::kSchemaViolation,
                      "level " + std::to_string(k) + ": '" + key + "' must be a non-negative integer");
        }
        const auto v = entry[key].get<std::size_t>();
        if (v != (key[0] == 'T' ? T : C)) {
          throw Error(ErrorCode::kLevelShapeMismatch,
                      "level " + std::to_string(k) + " declares " + key + "=" + std::to_string(v) +
                          ", header says " + std::to_string(key[0] == 'T' ? T : C));
        }
      }
    }
    FeatureLevel lvl;
    lvl.level_id = entry["id"].get<int>();
    lvl.grid = {entry["grid"][0].get<std::size_t>(), entry["grid"][1].get<std::size_t>()};
    const auto blob = read_file_bytes(level_blob_path(header_path, k));
    if (blob.size() != D * T * C * 4) {
      throw Error(ErrorCode::kLevelShapeMismatch,
                  level_blob_path(header_path, k).string() + ": " + std::to_string(blob.size()) +
                      " bytes, expected D*T*C*4 = " + std::to_string(D * T * C * 4));
    }
    lvl.tokens = decode_f32_le(blob);
    levels.push_back(std::move(lvl));
  }
  return SliceFeatureStack(D, T, C, std::move(levels));
}

void save_features(const SliceFeatureStack& stack, const fs::path& header_path) {
  Json hdr;
  hdr["D"] = stack.depth();
  hdr["T"] = stack.tokens_per_slice();
  hdr["C"] = stack.channels();
  Json levels = Json::array();
  for (std::size_t k = 0; k < stack.levels().size(); ++k) {
    const auto& lvl = stack.levels()[k];
    levels.push_back({{"id", lvl.level_id}, {"grid", {lvl.grid.gh, lvl.grid.gw}}});
    std::vector<std::uint8_t> blob;
    blob.reserve(lvl.tokens.size() * 4);
    append_f32_le(blob, lvl.tokens);
    write_file_atomic(level_blob_path(header_path, k), blob);
  }
  hdr["levels"] = levels;
  write_file_atomic(header_path, hdr.dump() + "\n");
}

}  // namespace medregion
