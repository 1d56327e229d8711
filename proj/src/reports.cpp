#include "medregion/reports.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "medregion/error.hpp"
#include "medregion/file_util.hpp"

namespace medregion {

namespace {

// Lower-cased words that end in a period without ending the sentence.
constexpr std::array<std::string_view, 12> kAbbreviations{
    "dr", "mr", "mrs", "ms", "e.g", "i.e", "vs", "approx", "fig", "cf", "incl", "resp"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Trimmed, with internal whitespace runs collapsed to one space.
std::string normalize_space(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

bool guarded(const std::string& text, std::size_t period) {
  std::size_t b = period;
  while (b > 0 && !std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
  const std::string word = lower(std::string_view(text).substr(b, period - b));
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

void check_region(int id) {
  if (!is_valid_region(id)) {
    throw Error(ErrorCode::kSchemaViolation, "region id " + std::to_string(id) + " outside 1..6");
  }
}

}  // namespace

const std::vector<std::string>& StructuredReport::sentences(int region_id) const {
  return regions[static_cast<std::size_t>(region_info(region_id).id - 1)];
}

std::string StructuredReport::text(int region_id) const {
  std::string out;
  for (const auto& s : sentences(region_id)) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  return from_json_text(read_file_text(path));
}

Lexicon Lexicon::from_json_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("lexicon: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kSchemaViolation, "lexicon must be an object");
  Lexicon lex;
  for (const auto& [key, words] : doc.items()) {
    int id = 0;
    try {
      id = std::stoi(key);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchemaViolation, "lexicon key '" + key + "' is not a region id");
    }
    check_region(id);
    if (!words.is_array()) {
      throw Error(ErrorCode::kSchemaViolation, "lexicon entry " + key + " must be an array");
    }
    for (const auto& w : words) {
      if (!w.is_string()) throw Error(ErrorCode::kSchemaViolation, "lexicon keywords are strings");
      lex.keywords[static_cast<std::size_t>(id - 1)].push_back(lower(w.get<std::string>()));
    }
  }
  return lex;
}

std::array<std::size_t, kNumRegions> Lexicon::hits(const std::string& sentence) const {
  const std::string s = lower(sentence);
  std::array<std::size_t, kNumRegions> out{};
  for (std::size_t r = 0; r < kNumRegions; ++r) {
    for (const auto& kw : keywords[r]) {
      if (kw.empty()) continue;
      for (std::size_t pos = s.find(kw); pos != std::string::npos; pos = s.find(kw, pos + 1)) {
        const bool left = pos == 0 || !is_word_char(s[pos - 1]);
        const std::size_t end = pos + kw.size();
        const bool right = end == s.size() || !is_word_char(s[end]);
        if (left && right) ++out[r];
      }
    }
  }
  return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] != '.' || !std::isspace(static_cast<unsigned char>(text[i + 1]))) continue;
    if (guarded(text, i)) continue;
    std::string sentence = normalize_space(std::string_view(text).substr(start, i + 1 - start));
    if (!sentence.empty()) out.push_back(std::move(sentence));
    start = i + 1;
  }
  std::string tail = normalize_space(std::string_view(text).substr(start));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

StructuredReport split_report(const std::string& text,
                              const std::optional<std::vector<int>>& sentence_labels,
                              const Lexicon& lexicon) {
  if (trim(text).empty()) throw Error(ErrorCode::kInvalidArgument, "report text is empty");
  const auto sentences = split_sentences(text);
  StructuredReport report;
  if (sentence_labels) {
    if (sentence_labels->size() != sentences.size()) {
      throw Error(ErrorCode::kLabelCountMismatch,
                  std::to_string(sentence_labels->size()) + " labels for " +
                      std::to_string(sentences.size()) + " sentences");
    }
    std::vector<LabeledSentence> labeled;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      labeled.push_back({sentences[i], (*sentence_labels)[i]});
    }
    return group_labeled(labeled);
  }
  report.source = ReportSource::kLexicon;
  int previous = 0;
  for (const auto& sentence : sentences) {
    const auto hits = lexicon.hits(sentence);
    const auto best = std::max_element(hits.begin(), hits.end());  // first maximum
    int region;
    if (*best > 0) {
      region = static_cast<int>(best - hits.begin()) + 1;
    } else {
      region = previous != 0 ? previous : 1;
    }
    report.regions[static_cast<std::size_t>(region - 1)].push_back(sentence);
    previous = region;
  }
  return report;
}

StructuredReport group_labeled(const std::vector<LabeledSentence>& sentences) {
  StructuredReport report;
  report.source = ReportSource::kLabeled;
  for (const auto& s : sentences) {
    check_region(s.region);
    report.regions[static_cast<std::size_t>(s.region - 1)].push_back(s.sentence);
  }
  return report;
}

std::vector<LabeledSentence> parse_labeled_jsonl(const std::string& text) {
  std::vector<LabeledSentence> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const Json j = Json::parse(line);
      LabeledSentence s{j.at("sentence").get<std::string>(), j.at("region").get<int>()};
      check_region(s.region);
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaViolation,
                  "labeled input line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string merge_reports(const StructuredReport& report, const MergeOptions& options) {
  std::string out;
  for (const auto& info : kRegions) {
    const std::string body = report.text(info.id);
    if (body.empty() && !options.complete) continue;
    if (!out.empty()) out += '\n';
    out += info.header;
    out += ' ';
    out += body.empty() ? "Unremarkable." : body;
  }
  return out;
}

StructuredReport parse_merged_report(const std::string& text, bool completeness_placeholders) {
  StructuredReport report;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const RegionInfo* match = nullptr;
    for (const auto& info : kRegions) {
      if (line.compare(0, info.header.size(), info.header) == 0) {
        match = &info;
        break;
      }
    }
    if (!match) {
      throw Error(ErrorCode::kSchemaViolation, "line without a region header: '" + line + "'");
    }
    const std::string body = trim(std::string_view(line).substr(match->header.size()));
    if (completeness_placeholders && body == "Unremarkable.") continue;
    auto& dst = report.regions[static_cast<std::size_t>(match->id - 1)];
    for (auto& s : split_sentences(body)) dst.push_back(std::move(s));
  }
  return report;
}

Json structured_report_to_json(const StructuredReport& report) {
  Json doc;
  doc["source"] = report.source == ReportSource::kLabeled ? "labeled" : "lexicon";
  Json regions = Json::object();
  for (const auto& r : kRegions) regions[std::to_string(r.id)] = report.sentences(r.id);
  doc["regions"] = regions;
  return doc;
}

StructuredReport structured_report_from_json(const Json& doc) {
  StructuredReport report;
  try {
    const std::string source = doc.value("source", std::string("labeled"));
    if (source != "labeled" && source != "lexicon") {
      throw Error(ErrorCode::kSchemaViolation, "unknown report source '" + source + "'");
    }
    report.source = source == "labeled" ? ReportSource::kLabeled : ReportSource::kLexicon;
    for (const auto& [key, sentences] : doc.at("regions").items()) {
      const int id = std::stoi(key);
      if (!is_valid_region(id)) {
        throw Error(ErrorCode::kSchemaViolation, "region key '" + key + "' is not 1..6");
      }
      report.regions[static_cast<std::size_t>(id - 1)] =
          sentences.get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("structured report: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::kSchemaViolation, "structured report region keys must be integers");
  }
  return report;
}

}  // namespace medregion
