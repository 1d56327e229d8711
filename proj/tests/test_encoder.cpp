#include <doctest.h>

#include <cmath>
#include <random>

#include "medregion/encoder.hpp"
#include "medregion/error.hpp"
#include "medregion/file_util.hpp"
#include "test_util.hpp"

using namespace medregion;
using testutil::TempDir;

namespace {

EncoderConfig config(std::size_t gh, std::size_t gw, std::size_t C, std::vector<int> levels = {3}) {
  EncoderConfig cfg;
  cfg.grid = {gh, gw};
  cfg.channels = C;
  cfg.level_ids = std::move(levels);
  return cfg;
}

float token_channel(const SliceFeatureStack& s, std::size_t level_index, std::size_t d,
                    std::size_t t, std::size_t c) {
  const auto& lvl = s.levels()[level_index];
  return s.slice_tokens(lvl, d)[t * s.channels() + c];
}

}  // namespace

TEST_CASE("stub encoder: zero and constant slices") {
  const auto zeros = testutil::image_from({2, 6, 6}, std::vector<float>(72, 0.0f));
  const auto z = stub_encode_volume(zeros, config(3, 2, 4));
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t t = 0; t < 6; ++t) CHECK(token_channel(z, 0, d, t, 0) == 0.0f);

  const auto constant = testutil::image_from({2, 6, 6}, std::vector<float>(72, 0.625f));
  const auto c = stub_encode_volume(constant, config(3, 2, 4));
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(token_channel(c, 0, d, t, 0) == 0.625f);
      CHECK(token_channel(c, 0, d, t, 1) == 0.0f);
    }
}

TEST_CASE("stub encoder: 2x2 slice {{0,1},{0,1}} on grid (1,2)") {
  const auto v = testutil::image_from({1, 2, 2}, {0.0f, 1.0f, 0.0f, 1.0f});
  const auto s = stub_encode_volume(v, config(1, 2, 2));
  CHECK(token_channel(s, 0, 0, 0, 0) == 0.0f);
  CHECK(token_channel(s, 0, 0, 1, 0) == 1.0f);
}

TEST_CASE("stub encoder: patch statistics match a brute-force window oracle") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<std::size_t> size(1, 11);
  for (int trial = 0; trial < 40; ++trial) {
    const Dims dims{size(rng) % 3 + 1, size(rng), size(rng)};
    std::uniform_int_distribution<std::size_t> gh_d(1, dims.h), gw_d(1, dims.w);
    const std::size_t gh = gh_d(rng), gw = gw_d(rng);
    const auto vol = testutil::image_from(dims, testutil::random_floats(rng, dims.count(), 0.0f, 1.0f));
    const auto s = stub_encode_volume(vol, config(gh, gw, 3));
    for (std::size_t d = 0; d < dims.d; ++d)
      for (std::size_t i = 0; i < gh; ++i)
        for (std::size_t j = 0; j < gw; ++j) {
          const std::size_t y0 = static_cast<std::size_t>(std::floor(double(i) * dims.h / gh));
          const std::size_t y1 = static_cast<std::size_t>(std::ceil(double(i + 1) * dims.h / gh));
          const std::size_t x0 = static_cast<std::size_t>(std::floor(double(j) * dims.w / gw));
          const std::size_t x1 = static_cast<std::size_t>(std::ceil(double(j + 1) * dims.w / gw));
          std::vector<double> vals;
          for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) vals.push_back(vol.at(d, y, x));
          double mean = 0.0;
          for (double v : vals) mean += v;
          mean /= static_cast<double>(vals.size());
          double var = 0.0;
          for (double v : vals) var += (v - mean) * (v - mean);
          var /= static_cast<double>(vals.size());
          CHECK(token_channel(s, 0, d, i * gw + j, 0) == doctest::Approx(mean).epsilon(1e-6));
          CHECK(std::abs(token_channel(s, 0, d, i * gw + j, 1) - std::sqrt(var)) <= 1e-6);
        }
  }
}

TEST_CASE("stub encoder: positional channels are bounded and level dependent") {
  const auto v = testutil::image_from({3, 8, 8}, std::vector<float>(192, 0.5f));
  const auto s = stub_encode_volume(v, config(4, 4, 16, {3, 6, 9, 12}));
  CHECK(s.levels().size() == 4);
  bool level_differs = false;
  for (std::size_t c = 2; c < 16; ++c) {
    for (std::size_t l = 0; l < 4; ++l) {
      const float x = token_channel(s, l, 2, 5, c);
      CHECK(std::abs(x) <= 1.0f);
      CHECK(x == positional_channel(c, 16, 2, 1, 1, s.levels()[l].level_id));
    }
    level_differs |= token_channel(s, 0, 2, 5, c) != token_channel(s, 3, 2, 5, c);
  }
  CHECK(level_differs);
  // Channel 2 is sin(slice * 1) on the slice coordinate.
  CHECK(positional_channel(2, 16, 2, 0, 0, 3) == static_cast<float>(std::sin(2.0)));
}

TEST_CASE("stub encoder: purity and slice equivariance of channels 0 and 1") {
  std::mt19937 rng(4);
  const Dims dims{4, 9, 7};
  const auto data = testutil::random_floats(rng, dims.count(), 0.0f, 1.0f);
  const auto vol = testutil::image_from(dims, data);
  const auto cfg = config(3, 3, 6, {3, 6});
  const auto a = stub_encode_volume(vol, cfg);
  const auto b = stub_encode_volume(vol, cfg);
  CHECK(a == b);

  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<float> permuted(data.size());
  for (std::size_t d = 0; d < dims.d; ++d) {
    std::copy(data.begin() + perm[d] * dims.slice_size(),
              data.begin() + (perm[d] + 1) * dims.slice_size(), permuted.begin() + d * dims.slice_size());
  }
  const auto p = stub_encode_volume(testutil::image_from(dims, permuted), cfg);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t d = 0; d < dims.d; ++d)
      for (std::size_t t = 0; t < 9; ++t) {
        CHECK(token_channel(p, l, d, t, 0) == token_channel(a, l, perm[d], t, 0));
        CHECK(token_channel(p, l, d, t, 1) == token_channel(a, l, perm[d], t, 1));
        CHECK(token_channel(p, l, d, t, 2) == positional_channel(2, 6, d, t / 3, t % 3, a.levels()[l].level_id));
      }
}

TEST_CASE("stub encoder: grid finer than the slice") {
  const auto v = testutil::image_from({1, 4, 4}, std::vector<float>(16, 0.0f));
  CHECK_THROWS_AS(stub_encode_volume(v, config(5, 2, 2)), Error);
  try {
    stub_encode_volume(v, config(2, 5, 2));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGridTooFine);
  }
}

TEST_CASE("feature container: hand-written file with 1 level, D=2, T=4, C=3") {
  TempDir tmp;
  write_json_file(tmp / "f.json",
                  Json::parse(R"({"D":2,"T":4,"C":3,"levels":[{"id":7,"grid":[2,2]}]})"));
  std::vector<float> values(24);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(i);
  std::vector<std::uint8_t> blob;
  append_f32_le(blob, values);
  write_file_atomic(tmp / "f.level0.bin", blob);
  const auto s = load_precomputed_features(tmp / "f.json");
  CHECK(s.depth() == 2);
  CHECK(s.tokens_per_slice() == 4);
  CHECK(s.channels() == 3);
  CHECK(s.levels()[0].level_id == 7);
  CHECK(s.level(7).grid == Grid{2, 2});
  CHECK(s.slice_tokens(s.level(7), 1)[0] == 12.0f);
  CHECK_THROWS_AS(s.level(8), Error);
}

TEST_CASE("feature container: inconsistent levels are LevelShapeMismatch") {
  TempDir tmp;
  auto expect_code = [&](const char* header, std::size_t blob_floats, ErrorCode code) {
    write_json_file(tmp / "g.json", Json::parse(header));
    std::vector<std::uint8_t> blob;
    append_f32_le(blob, std::vector<float>(blob_floats, 0.0f));
    write_file_atomic(tmp / "g.level0.bin", blob);
    write_file_atomic(tmp / "g.level1.bin", blob);
    try {
      load_precomputed_features(tmp / "g.json");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  expect_code(R"({"D":1,"T":4,"C":2,"levels":[{"id":1,"grid":[2,2]},{"id":2,"grid":[2,2],"C":3}]})",
              8, ErrorCode::kLevelShapeMismatch);
  expect_code(R"({"D":1,"T":4,"C":2,"levels":[{"id":1,"grid":[2,3]}]})", 8,
              ErrorCode::kLevelShapeMismatch);
  expect_code(R"({"D":1,"T":4,"C":2,"levels":[{"id":1,"grid":[2,2]}]})", 7,
              ErrorCode::kLevelShapeMismatch);
  expect_code(R"({"D":1,"T":4,"levels":[{"id":1,"grid":[2,2]}]})", 8, ErrorCode::kSchemaViolation);
  CHECK_THROWS_AS(SliceFeatureStack(1, 4, 2, {FeatureLevel{1, {2, 2}, std::vector<float>(8)},
                                               FeatureLevel{2, {2, 2}, std::vector<float>(12)}}),
                  Error);
}

TEST_CASE("feature container: stub stack round trip is bitwise equal") {
  TempDir tmp;
  std::mt19937 rng(8);
  const auto vol = testutil::image_from({3, 10, 12}, testutil::random_floats(rng, 360, 0.0f, 1.0f));
  const auto s = stub_encode_volume(vol, config(5, 6, 8, {3, 6, 9, 12}));
  save_features(s, tmp / "feat.json");
  const auto back = load_precomputed_features(tmp / "feat.json");
  CHECK(back == s);
  CHECK(read_file_bytes(level_blob_path(tmp / "feat.json", 3)).size() == 3 * 30 * 8 * 4);
}
