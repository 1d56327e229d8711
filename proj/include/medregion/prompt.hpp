#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "medregion/attrx.hpp"
#include "medregion/maskex.hpp"
#include "medregion/r2_pool.hpp"

namespace medregion {

// One decimal, ties to even on the decimal digit ("4321.05" -> "4321.0").
std::string format_one_decimal(double value);

// "Organ volumes:" block followed by a "Lesions:" block.
std::string render_attribute_report(const PatientAttributes& attrs);

struct ParsedLesion {
  std::uint32_t count = 0;
  std::vector<double> diameters;
  std::string unit;
  std::string location;
};

struct ParsedAttributeReport {
  std::map<std::string, double> organ_volumes_ml;
  std::map<std::string, ParsedLesion> lesions;
};

// Inverse of render_attribute_report. Throws SchemaViolation on text it did
// not produce.
ParsedAttributeReport parse_attribute_report(const std::string& text);

enum class SegmentKind { kText, kVisionTokens, kSegToken };
enum class SegPart { kMask, kSpatial };

struct PromptSegment {
  SegmentKind kind = SegmentKind::kText;
  std::string text;               // kText
  std::size_t token_count = 0;    // kVisionTokens
  int region_id = 0;              // kSegToken
  SegPart part = SegPart::kMask;  // kSegToken
  std::vector<float> values;      // kSegToken payload
};

// Blocks between the preamble and the closing instruction.
enum class PromptSection { kVision, kSegmentation, kAttributes };

struct PromptOptions {
  std::string preamble =
      "You are given a chest CT volume as image tokens, two segmentation tokens "
      "for each of six anatomical regions, and measurements taken from the "
      "segmentation masks.";
  std::vector<PromptSection> order{PromptSection::kVision, PromptSection::kSegmentation,
                                   PromptSection::kAttributes};
  std::size_t max_sequence_length = 2048;
};

struct PromptBundle {
  std::string study_id;
  int region_id = 0;
  std::string instruction;
  std::string attr_text;
  std::vector<PromptSegment> segments;
  std::shared_ptr<const TokenSequence> vision;

  // Placeholders plus whitespace-delimited words of the text segments.
  std::size_t token_budget() const;
};

std::string region_instruction(int region_id);

// Fixed layout for every study: preamble, vision tokens, "<region i>" label
// followed by its mask and spatial token for i = 1..6, attribute text, region
// instruction. Throws StudyMismatch, InvalidArgument (region id), or
// PromptTooLong when the budget exceeds options.max_sequence_length.
PromptBundle build_prompt(std::shared_ptr<const TokenSequence> tokens,
                          const SegmentationTokenSet& segtoks, const std::string& attr_text,
                          int region_id, const PromptOptions& options = {});

// Text rendering with <img:k> and <seg:r:m|s> placeholders.
std::string render_prompt_text(const PromptBundle& bundle);

// A header line {"kind":"bundle",...} followed by one JSON object per
// segment. Payloads are summarised by a digest unless
// `include_payload` is set.
std::string prompt_to_jsonl(const PromptBundle& bundle, bool include_payload = false);

// Reads prompt_to_jsonl output back. Vision payloads are not restored.
PromptBundle prompt_from_jsonl(const std::string& text);

// FNV-1a 64 over the little-endian bytes of the values, as 16 hex digits.
std::string float_digest(std::span<const float> values);

}  // namespace medregion
