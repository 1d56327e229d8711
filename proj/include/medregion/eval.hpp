#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "medregion/file_util.hpp"

namespace medregion {

// Lower-cased word tokens; every non-alphanumeric ASCII character separates
// words.
std::vector<std::string> tokenize_words(std::string_view text);

// Porter (1980) suffix-stripping stemmer on a lower-case word.
std::string porter_stem(std::string_view word);

struct BleuOptions {
  // Replaces zero match counts and zero n-gram totals.
  double epsilon = 1e-9;
  int max_order = 4;
};

// Geometric mean of clipped n-gram precisions times min(1, exp(1 - r/c)).
double bleu4(std::string_view candidate, std::string_view reference,
             const BleuOptions& options = {});

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// LCS F-measure, beta = 1.2.
double rouge_l(std::string_view candidate, std::string_view reference, double beta = 1.2);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t exact_matches = 0;
  std::size_t chunks = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (candidate, reference)
};

// Exact-match stage followed by a Porter-stem stage.
MeteorAlignment meteor_align(const std::vector<std::string>& candidate,
                             const std::vector<std::string>& reference);

// METEOR without the synonym stage.
double meteor_lite(std::string_view candidate, std::string_view reference,
                   const MeteorParams& params = {});

struct PairScores {
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor_lite = 0.0;
};

struct TextPair {
  std::string candidate;
  std::string reference;
};

struct MetricReport {
  std::vector<PairScores> per_pair;
  PairScores corpus;  // arithmetic means
  std::size_t n = 0;
};

MetricReport evaluate_pairs(const std::vector<TextPair>& pairs);
// JSON lines {"candidate": "...", "reference": "..."}.
std::vector<TextPair> parse_pairs_jsonl(const std::string& text);
Json metric_report_to_json(const MetricReport& report);

}  // namespace medregion
