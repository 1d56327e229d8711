#include <doctest.h>

#include <cmath>
#include <random>

#include "medregion/error.hpp"
#include "medregion/prompt.hpp"
#include "test_util.hpp"

using namespace medregion;

namespace {

std::shared_ptr<const TokenSequence> vision(const std::string& id, std::size_t D, std::size_t T,
                                            std::size_t C, unsigned seed = 1) {
  std::mt19937 rng(seed);
  auto seq = std::make_shared<TokenSequence>();
  seq->study_id = id;
  seq->global = Matrix(D, C);
  seq->region = Matrix(T, C);
  seq->global.data = testutil::random_floats(rng, D * C);
  seq->region.data = testutil::random_floats(rng, T * C);
  return seq;
}

SegmentationTokenSet segtoks(const std::string& id, unsigned positive_bits, std::size_t C = 4) {
  SegmentationTokenSet set;
  set.study_id = id;
  for (int r = 1; r <= 6; ++r) {
    const bool pos = (positive_bits >> (r - 1)) & 1u;
    set.entries.push_back({r, std::vector<float>(C, pos ? 0.5f * r : -0.1f),
                           std::vector<float>(C, pos ? 0.25f * r : -0.2f), pos});
  }
  return set;
}

std::string kinds(const PromptBundle& b) {
  std::string out;
  for (const auto& s : b.segments)
    out += s.kind == SegmentKind::kText ? 'T' : s.kind == SegmentKind::kVisionTokens ? 'V' : 'S';
  return out;
}

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::size_t words(const std::string& s) {
  std::size_t n = 0;
  bool in = false;
  for (char c : s) {
    const bool sp = std::isspace(static_cast<unsigned char>(c));
    if (!sp && !in) ++n;
    in = !sp;
  }
  return n;
}

}  // namespace

TEST_CASE("format_one_decimal: round half to even on the first decimal") {
  CHECK(format_one_decimal(4321.05) == "4321.0");
  CHECK(format_one_decimal(0.25) == "0.2");
  CHECK(format_one_decimal(0.35) == "0.4");
  CHECK(format_one_decimal(2.5) == "2.5");
  CHECK(format_one_decimal(0.04) == "0.0");
  CHECK(format_one_decimal(-1.25) == "-1.2");
  CHECK(format_one_decimal(-0.04) == "0.0");
  CHECK(format_one_decimal(9.96) == "10.0");
  CHECK(format_one_decimal(1234567.891) == "1234567.9");
  CHECK_THROWS_AS(format_one_decimal(std::nan("")), Error);
}

TEST_CASE("render_attribute_report: templates") {
  CHECK(render_attribute_report(PatientAttributes{}) ==
        "Organ volumes: none reported.\nLesions: none reported.");

  PatientAttributes a;
  a.organ_volumes_ml["lung"] = 4321.05;
  a.lesions["nodule"] = {2, {4.0, 7.0}, "lung"};
  const std::string text = render_attribute_report(a);
  CHECK(text == "Organ volumes:\nlung: 4321.0 mL\nLesions:\nnodule \xE2\x80\x94 count 2, diameters 4.0/7.0 mm, location lung");
}

TEST_CASE("render_attribute_report round-trips through the parser") {
  std::mt19937 rng(211);
  std::uniform_real_distribution<double> vol(0.0, 5000.0), diam(0.5, 80.0);
  const std::vector<std::string> organs{"heart", "kidney", "liver", "lung"};
  for (int trial = 0; trial < 100; ++trial) {
    PatientAttributes a;
    a.diameter_unit = trial % 3 == 0 ? LengthUnit::kVoxel : LengthUnit::kMillimetre;
    for (const auto& o : organs)
      if (rng() % 2) a.organ_volumes_ml[o] = vol(rng);
    const int nl = int(rng() % 4);
    for (int l = 0; l < nl; ++l) {
      LesionStats s;
      s.count = rng() % 4;
      for (std::uint32_t k = 0; k < s.count; ++k) s.diameters.push_back(diam(rng));
      s.location = l % 2 ? "upper abdomen" : "lung";
      a.lesions["lesion_" + std::to_string(l)] = s;
    }
    const auto p = parse_attribute_report(render_attribute_report(a));
    REQUIRE(p.organ_volumes_ml.size() == a.organ_volumes_ml.size());
    for (const auto& [name, ml] : a.organ_volumes_ml) CHECK(std::abs(p.organ_volumes_ml.at(name) - ml) <= 0.05 + 1e-9);
    REQUIRE(p.lesions.size() == a.lesions.size());
    for (const auto& [name, s] : a.lesions) {
      const auto& q = p.lesions.at(name);
      CHECK(q.count == s.count);
      CHECK(q.location == s.location);
      REQUIRE(q.diameters.size() == s.diameters.size());
      for (std::size_t k = 0; k < s.diameters.size(); ++k) CHECK(std::abs(q.diameters[k] - s.diameters[k]) <= 0.05 + 1e-9);
      if (s.count) CHECK(q.unit == (a.diameter_unit == LengthUnit::kVoxel ? "voxels" : "mm"));
    }
  }
  CHECK_THROWS_AS(parse_attribute_report("Organ volumes:\nlung is big\nLesions: none reported."), Error);
}

TEST_CASE("build_prompt: fixed layout for all 64 positivity patterns") {
  const auto v = vision("s", 4, 6, 4);
  const std::string golden = "TV" + std::string("TSS TSS TSS TSS TSS TSS") + "TT";
  std::string expected;
  for (char c : golden)
    if (c != ' ') expected += c;
  for (unsigned bits = 0; bits < 64; ++bits) {
    for (int region = 1; region <= 6; ++region) {
      const auto b = build_prompt(v, segtoks("s", bits), "Organ volumes: none reported.", region);
      CHECK(kinds(b) == expected);
      int label = 0;
      int seg_region = 0;
      for (const auto& s : b.segments) {
        if (s.kind == SegmentKind::kText && s.text.rfind("<region ", 0) == 0)
          CHECK(s.text == "<region " + std::to_string(++label) + ">");
        if (s.kind == SegmentKind::kSegToken) {
          if (s.part == SegPart::kMask) ++seg_region;
          CHECK(s.region_id == seg_region);
        }
      }
      CHECK(label == 6);
      CHECK(b.segments.back().text == region_instruction(region));
    }
  }
  CHECK(region_instruction(6) == "Describe findings for upper abdomen.");
}

TEST_CASE("build_prompt: 356 vision placeholders and the placeholder count law") {
  const auto v = vision("study", 32, 324, 8);
  const auto b = build_prompt(v, segtoks("study", 0x3f, 8), "Organ volumes: none reported.\nLesions: none reported.", 1);
  CHECK(b.segments[1].token_count == 356);
  const std::string text = render_prompt_text(b);
  CHECK(occurrences(text, "<img:") == 356);
  CHECK(occurrences(text, "<seg:") == 12);
  CHECK(text.find("<img:355>") != std::string::npos);
  CHECK(text.find("<seg:3:s>") != std::string::npos);
  std::size_t text_words = 0;
  for (const auto& s : b.segments)
    if (s.kind == SegmentKind::kText) text_words += words(s.text);
  CHECK(b.token_budget() == 356 + 12 + text_words);
  CHECK(b.token_budget() <= 2048);
}

TEST_CASE("build_prompt: errors") {
  const auto v = vision("a", 32, 324, 4);
  try {
    build_prompt(v, segtoks("b", 0), "", 1);
    FAIL("expected StudyMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStudyMismatch);
  }
  PromptOptions tight;
  tight.max_sequence_length = 360;
  try {
    build_prompt(v, segtoks("a", 0), "", 1, tight);
    FAIL("expected PromptTooLong");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPromptTooLong);
  }
  CHECK_THROWS_AS(build_prompt(v, segtoks("a", 0), "", 7), Error);
  CHECK_THROWS_AS(build_prompt(nullptr, segtoks("a", 0), "", 1), Error);
}

TEST_CASE("build_prompt: configurable section order") {
  PromptOptions opts;
  opts.order = {PromptSection::kAttributes, PromptSection::kSegmentation, PromptSection::kVision};
  const auto b = build_prompt(vision("s", 2, 2, 4), segtoks("s", 1), "attrs", 2, opts);
  CHECK(kinds(b) == "TTTSSTSSTSSTSSTSSTSSVT");
  CHECK(b.segments[1].text == "attrs");
}

TEST_CASE("prompt JSONL: round trip and injectivity on inputs") {
  const auto v = vision("s", 4, 6, 4, 3);
  const auto base = build_prompt(v, segtoks("s", 0x2a), "Organ volumes: none reported.", 3);
  const std::string jsonl = prompt_to_jsonl(base);
  const auto back = prompt_from_jsonl(jsonl);
  CHECK(back.study_id == "s");
  CHECK(back.region_id == 3);
  CHECK(back.instruction == base.instruction);
  CHECK(kinds(back) == kinds(base));
  CHECK(back.token_budget() == base.token_budget());
  const auto first = Json::parse(jsonl.substr(0, jsonl.find('\n')));
  CHECK(first["kind"] == "bundle");
  CHECK(first["token_budget"] == base.token_budget());

  const auto full = prompt_from_jsonl(prompt_to_jsonl(base, true));
  for (std::size_t i = 0; i < base.segments.size(); ++i) CHECK(full.segments[i].values == base.segments[i].values);

  // Each input change changes the serialized form.
  const auto v2 = vision("s", 4, 6, 4, 4);
  auto seg2 = segtoks("s", 0x2a);
  seg2.entries[4].spatial_token[1] += 1e-3f;
  CHECK(prompt_to_jsonl(build_prompt(v2, segtoks("s", 0x2a), "Organ volumes: none reported.", 3)) != jsonl);
  CHECK(prompt_to_jsonl(build_prompt(v, seg2, "Organ volumes: none reported.", 3)) != jsonl);
  CHECK(prompt_to_jsonl(build_prompt(v, segtoks("s", 0x2a), "Organ volumes: none.", 3)) != jsonl);
  CHECK(prompt_to_jsonl(build_prompt(v, segtoks("s", 0x2a), "Organ volumes: none reported.", 4)) != jsonl);
  CHECK(prompt_to_jsonl(build_prompt(v, segtoks("s", 0x2a), "Organ volumes: none reported.", 3)) == jsonl);

  CHECK_THROWS_AS(prompt_from_jsonl("{\"kind\":\"text\",\"text\":\"x\"}\n"), Error);
  CHECK_THROWS_AS(prompt_from_jsonl("not json\n"), Error);
  CHECK_THROWS_AS(prompt_from_jsonl("{\"kind\":\"bundle\",\"study_id\":\"s\",\"region\":1}\n{\"kind\":\"video\"}\n"), Error);
}

TEST_CASE("float_digest: FNV-1a over little-endian bytes") {
  CHECK(float_digest(std::vector<float>{}) == "cbf29ce484222325");
  // 1.0f is 00 00 80 3f; fold the bytes by hand.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : {0x00, 0x00, 0x80, 0x3f}) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  CHECK(float_digest(std::vector<float>{1.0f}) == buf);
}
