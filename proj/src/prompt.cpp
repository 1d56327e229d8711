#include "medregion/prompt.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "medregion/error.hpp"
#include "medregion/file_util.hpp"

namespace medregion {

namespace {

constexpr std::string_view kOrganHeader = "Organ volumes:";
constexpr std::string_view kLesionHeader = "Lesions:";
constexpr std::string_view kNoneReported = " none reported.";
constexpr std::string_view kDash = " — ";

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw Error(ErrorCode::kSchemaViolation, "expected a number, got '" + s + "'");
  }
  return v;
}

std::string join_diameters(const std::vector<double>& diameters) {
  std::string out;
  for (std::size_t i = 0; i < diameters.size(); ++i) {
    if (i) out += '/';
    out += format_one_decimal(diameters[i]);
  }
  return out;
}

PromptSegment text_segment(std::string text) {
  PromptSegment seg;
  seg.kind = SegmentKind::kText;
  seg.text = std::move(text);
  return seg;
}

void append_u64_hex(std::string& out, std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  out += buf;
}

}  // namespace

std::string format_one_decimal(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidArgument, "cannot format a non-finite value");
  }
  // Decimal expansion to six places, then round half-even on the first digit.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", std::abs(value));
  const char* dot = std::strchr(buf, '.');
  const std::string int_part(buf, static_cast<std::size_t>(dot - buf));
  const std::string frac(dot + 1);
  unsigned long long scaled = std::stoull(int_part) * 10 + static_cast<unsigned>(frac[0] - '0');
  const std::string rest = frac.substr(1);
  const int cmp = rest.compare("50000");
  if (cmp > 0 || (cmp == 0 && scaled % 2 == 1)) ++scaled;
  std::string out = (value < 0 && scaled != 0) ? "-" : "";
  out += std::to_string(scaled / 10) + "." + std::to_string(scaled % 10);
  return out;
}

std::string render_attribute_report(const PatientAttributes& attrs) {
  std::string out(kOrganHeader);
  if (attrs.organ_volumes_ml.empty()) {
    out += kNoneReported;
  } else {
    for (const auto& [name, ml] : attrs.organ_volumes_ml) {
      out += "\n" + name + ": " + format_one_decimal(ml) + " mL";
    }
  }
  out += "\n";
  out += kLesionHeader;
  if (attrs.lesions.empty()) {
    out += kNoneReported;
    return out;
  }
  const char* unit = attrs.diameter_unit == LengthUnit::kVoxel ? " voxels" : " mm";
  for (const auto& [name, stats] : attrs.lesions) {
    out += "\n" + name;
    out += kDash;
    out += "count " + std::to_string(stats.count) + ", diameters ";
    out += stats.diameters.empty() ? std::string("none") : join_diameters(stats.diameters) + unit;
    out += ", location " + stats.location;
  }
  return out;
}

ParsedAttributeReport parse_attribute_report(const std::string& text) {
  ParsedAttributeReport out;
  const auto lines = split_lines(text);
  enum class Block { kNone, kOrgans, kLesions } block = Block::kNone;
  for (const auto& line : lines) {
    if (starts_with(line, kOrganHeader)) {
      block = Block::kOrgans;
      continue;
    }
    if (starts_with(line, kLesionHeader)) {
      block = Block::kLesions;
      continue;
    }
    if (block == Block::kOrgans) {
      const auto colon = line.rfind(": ");
      if (colon == std::string::npos || line.size() < 3 || line.substr(line.size() - 3) != " mL") {
        throw Error(ErrorCode::kSchemaViolation, "bad organ line '" + line + "'");
      }
      out.organ_volumes_ml[line.substr(0, colon)] =
          parse_number(line.substr(colon + 2, line.size() - 3 - (colon + 2)));
    } else if (block == Block::kLesions) {
      const auto dash = line.find(kDash);
      const auto comma1 = line.find(", diameters ", dash);
      const auto comma2 = line.rfind(", location ");
      if (dash == std::string::npos || comma1 == std::string::npos ||
          comma2 == std::string::npos || comma2 < comma1) {
        throw Error(ErrorCode::kSchemaViolation, "bad lesion line '" + line + "'");
      }
      ParsedLesion lesion;
      const std::string count_part = line.substr(dash + kDash.size(), comma1 - dash - kDash.size());
      if (!starts_with(count_part, "count ")) {
        throw Error(ErrorCode::kSchemaViolation, "bad lesion count in '" + line + "'");
      }
      lesion.count = static_cast<std::uint32_t>(parse_number(count_part.substr(6)));
      std::string diam = line.substr(comma1 + 12, comma2 - comma1 - 12);
      if (diam != "none") {
        const auto space = diam.rfind(' ');
        if (space == std::string::npos) {
          throw Error(ErrorCode::kSchemaViolation, "bad diameters in '" + line + "'");
        }
        lesion.unit = diam.substr(space + 1);
        std::istringstream parts(diam.substr(0, space));
        std::string item;
        while (std::getline(parts, item, '/')) lesion.diameters.push_back(parse_number(item));
      }
      lesion.location = line.substr(comma2 + 11);
      out.lesions[line.substr(0, dash)] = std::move(lesion);
    } else if (!line.empty()) {
      throw Error(ErrorCode::kSchemaViolation, "text before the organ block: '" + line + "'");
    }
  }
  return out;
}

std::size_t PromptBundle::token_budget() const {
  std::size_t n = 0;
  for (const auto& seg : segments) {
    switch (seg.kind) {
      case SegmentKind::kText: n += count_words(seg.text); break;
      case SegmentKind::kVisionTokens: n += seg.token_count; break;
      case SegmentKind::kSegToken: n += 1; break;
    }
  }
  return n;
}

std::string region_instruction(int region_id) {
  return "Describe findings for " + std::string(region_info(region_id).name) + ".";
}

PromptBundle build_prompt(std::shared_ptr<const TokenSequence> tokens,
                          const SegmentationTokenSet& segtoks, const std::string& attr_text,
                          int region_id, const PromptOptions& options) {
  if (!tokens) throw Error(ErrorCode::kInvalidArgument, "missing vision tokens");
  if (tokens->study_id != segtoks.study_id) {
    throw Error(ErrorCode::kStudyMismatch,
                "vision tokens belong to '" + tokens->study_id + "', segmentation tokens to '" +
                    segtoks.study_id + "'");
  }
  if (segtoks.entries.size() != kNumRegions) {
    throw Error(ErrorCode::kInvalidArgument, "segmentation token set needs 6 entries");
  }
  PromptBundle bundle;
  bundle.study_id = tokens->study_id;
  bundle.region_id = region_id;
  bundle.instruction = region_instruction(region_id);
  bundle.attr_text = attr_text;
  bundle.vision = tokens;

  bundle.segments.push_back(text_segment(options.preamble));
  for (PromptSection section : options.order) {
    switch (section) {
      case PromptSection::kVision: {
        PromptSegment seg;
        seg.kind = SegmentKind::kVisionTokens;
        seg.token_count = tokens->size();
        bundle.segments.push_back(std::move(seg));
        break;
      }
      case PromptSection::kSegmentation:
        for (const auto& entry : segtoks.entries) {
          bundle.segments.push_back(text_segment("<region " + std::to_string(entry.region_id) + ">"));
          for (SegPart part : {SegPart::kMask, SegPart::kSpatial}) {
            PromptSegment seg;
            seg.kind = SegmentKind::kSegToken;
            seg.region_id = entry.region_id;
            seg.part = part;
            seg.values = part == SegPart::kMask ? entry.mask_token : entry.spatial_token;
            bundle.segments.push_back(std::move(seg));
          }
        }
        break;
      case PromptSection::kAttributes:
        bundle.segments.push_back(text_segment(attr_text));
        break;
    }
  }
  bundle.segments.push_back(text_segment(bundle.instruction));

  const std::size_t budget = bundle.token_budget();
  if (budget > options.max_sequence_length) {
    throw Error(ErrorCode::kPromptTooLong,
                "prompt needs " + std::to_string(budget) + " tokens, limit is " +
                    std::to_string(options.max_sequence_length));
  }
  return bundle;
}

std::string render_prompt_text(const PromptBundle& bundle) {
  std::string out;
  bool first = true;
  for (const auto& seg : bundle.segments) {
    if (!first && seg.kind != SegmentKind::kSegToken) out += '\n';
    first = false;
    switch (seg.kind) {
      case SegmentKind::kText:
        out += seg.text;
        break;
      case SegmentKind::kVisionTokens:
        for (std::size_t k = 0; k < seg.token_count; ++k) out += "<img:" + std::to_string(k) + ">";
        break;
      case SegmentKind::kSegToken:
        out += "<seg:" + std::to_string(seg.region_id) + (seg.part == SegPart::kMask ? ":m>" : ":s>");
        break;
    }
  }
  return out;
}

std::string float_digest(std::span<const float> values) {
  std::vector<std::uint8_t> bytes;
  append_f32_le(bytes, values);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  std::string out;
  append_u64_hex(out, h);
  return out;
}

std::string prompt_to_jsonl(const PromptBundle& bundle, bool include_payload) {
  std::string out = Json{{"kind", "bundle"},
                         {"study_id", bundle.study_id},
                         {"region", bundle.region_id},
                         {"token_budget", bundle.token_budget()}}
                        .dump();
  out += '\n';
  for (const auto& seg : bundle.segments) {
    Json j;
    switch (seg.kind) {
      case SegmentKind::kText:
        j["kind"] = "text";
        j["text"] = seg.text;
        break;
      case SegmentKind::kVisionTokens: {
        j["kind"] = "vision_tokens";
        j["count"] = seg.token_count;
        std::vector<float> flat;
        if (bundle.vision) {
          flat = bundle.vision->global.data;
          flat.insert(flat.end(), bundle.vision->region.data.begin(),
                      bundle.vision->region.data.end());
        }
        j["digest"] = float_digest(flat);
        if (include_payload) {
          j["channels"] = bundle.vision ? bundle.vision->channels() : 0;
          j["values"] = flat;
        }
        break;
      }
      case SegmentKind::kSegToken:
        j["kind"] = "seg_token";
        j["region"] = seg.region_id;
        j["part"] = seg.part == SegPart::kMask ? "mask" : "spatial";
        j["digest"] = float_digest(seg.values);
        if (include_payload) j["values"] = seg.values;
        break;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

PromptBundle prompt_from_jsonl(const std::string& text) {
  PromptBundle bundle;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const Json j = Json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "bundle") {
        bundle.study_id = j.at("study_id").get<std::string>();
        bundle.region_id = j.at("region").get<int>();
        have_header = true;
        continue;
      }
      PromptSegment seg;
      if (kind == "text") {
        seg = text_segment(j.at("text").get<std::string>());
      } else if (kind == "vision_tokens") {
        seg.kind = SegmentKind::kVisionTokens;
        seg.token_count = j.at("count").get<std::size_t>();
      } else if (kind == "seg_token") {
        seg.kind = SegmentKind::kSegToken;
        seg.region_id = j.at("region").get<int>();
        const std::string part = j.at("part").get<std::string>();
        if (part != "mask" && part != "spatial") {
          throw Error(ErrorCode::kSchemaViolation, "unknown seg_token part '" + part + "'");
        }
        seg.part = part == "mask" ? SegPart::kMask : SegPart::kSpatial;
        if (j.contains("values")) seg.values = j["values"].get<std::vector<float>>();
      } else {
        throw Error(ErrorCode::kSchemaViolation, "unknown segment kind '" + kind + "'");
      }
      bundle.segments.push_back(std::move(seg));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation,
                "prompt line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw Error(ErrorCode::kSchemaViolation, "prompt bundle header line missing");
  if (!bundle.segments.empty() && bundle.segments.back().kind == SegmentKind::kText) {
    bundle.instruction = bundle.segments.back().text;
  }
  return bundle;
}

}  // namespace medregion
