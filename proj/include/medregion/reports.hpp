#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medregion/file_util.hpp"
#include "medregion/regions.hpp"

namespace medregion {

enum class ReportSource { kLabeled, kLexicon };

// Sentences per region, canonical order; index = region id - 1.
struct StructuredReport {
  std::array<std::vector<std::string>, kNumRegions> regions;
  ReportSource source = ReportSource::kLabeled;

  const std::vector<std::string>& sentences(int region_id) const;
  // Sentences of one region joined by single spaces.
  std::string text(int region_id) const;

  friend bool operator==(const StructuredReport&, const StructuredReport&) = default;
};

// Keyword lists per region, matched case-insensitively on word boundaries.
struct Lexicon {
  std::array<std::vector<std::string>, kNumRegions> keywords;

  // JSON {"1": [...], ..., "6": [...]}; missing regions get no keywords.
  static Lexicon load(const std::filesystem::path& path);
  static Lexicon from_json_text(const std::string& text);

  // Keyword hits of `sentence` for each region.
  std::array<std::size_t, kNumRegions> hits(const std::string& sentence) const;
};

// Splits on ". " (a period followed by whitespace) unless the word before the
// period is a guarded abbreviation. Sentences keep their final period.
std::vector<std::string> split_sentences(const std::string& text);

// Labeled mode when `sentence_labels` is given (one region id per sentence,
// else LabelCountMismatch); lexicon mode otherwise. In lexicon mode a
// sentence goes to the region with most hits (ties to the lower id); with no
// hits it stays with the previous sentence's region, or region 1.
StructuredReport split_report(const std::string& text,
                              const std::optional<std::vector<int>>& sentence_labels,
                              const Lexicon& lexicon);

struct LabeledSentence {
  std::string sentence;
  int region = 0;
};

StructuredReport group_labeled(const std::vector<LabeledSentence>& sentences);
// JSON lines {"sentence": "...", "region": 1..6}.
std::vector<LabeledSentence> parse_labeled_jsonl(const std::string& text);

struct MergeOptions {
  // Emit "<header> Unremarkable." for regions without sentences.
  bool complete = false;
};

// One "<header> sentences" line per region, canonical order.
std::string merge_reports(const StructuredReport& report, const MergeOptions& options = {});

// Inverse of merge_reports; "Unremarkable." placeholders are dropped when
// `completeness_placeholders` is set.
StructuredReport parse_merged_report(const std::string& text, bool completeness_placeholders = false);

// {"source": "labeled"|"lexicon", "regions": {"1": [sentences], ...}}.
Json structured_report_to_json(const StructuredReport& report);
StructuredReport structured_report_from_json(const Json& doc);

}  // namespace medregion
