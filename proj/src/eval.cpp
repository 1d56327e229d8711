#include "medregion/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "medregion/error.hpp"

namespace medregion {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& words, std::size_t n) {
  NgramCounts counts;
  if (words.size() < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                      words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

// Picks the reference position for candidate word i: the one right after the
// reference position aligned to the nearest earlier candidate word, if it
// qualifies, else the leftmost qualifying position.
template <typename Key>
void align_stage(const std::vector<Key>& cand, const std::vector<Key>& ref,
                 std::vector<long>& cand_to_ref, std::vector<bool>& ref_used) {
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (cand_to_ref[i] >= 0) continue;
    long previous = -1;
    for (std::size_t k = i; k-- > 0;) {
      if (cand_to_ref[k] >= 0) {
        previous = cand_to_ref[k];
        break;
      }
    }
    long chosen = -1;
    const auto next = static_cast<std::size_t>(previous + 1);
    if (next < ref.size() && !ref_used[next] && ref[next] == cand[i]) {
      chosen = static_cast<long>(next);
    } else {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!ref_used[j] && ref[j] == cand[i]) {
          chosen = static_cast<long>(j);
          break;
        }
      }
    }
    if (chosen >= 0) {
      cand_to_ref[i] = chosen;
      ref_used[static_cast<std::size_t>(chosen)] = true;
    }
  }
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

double bleu4(std::string_view candidate, std::string_view reference, const BleuOptions& options) {
  const auto cand = tokenize_words(candidate);
  const auto ref = tokenize_words(reference);
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= options.max_order; ++n) {
    const auto cand_counts = count_ngrams(cand, static_cast<std::size_t>(n));
    const auto ref_counts = count_ngrams(ref, static_cast<std::size_t>(n));
    std::size_t matches = 0, total = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    const double num = matches == 0 ? options.epsilon : static_cast<double>(matches);
    const double den = total == 0 ? options.epsilon : static_cast<double>(total);
    log_sum += std::log(num / den);
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = std::min(1.0, std::exp(1.0 - r / c));
  return bp * std::exp(log_sum / options.max_order);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference, double beta) {
  const auto cand = tokenize_words(candidate);
  const auto ref = tokenize_words(reference);
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(cand.size());
  const double r = lcs / static_cast<double>(ref.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

MeteorAlignment meteor_align(const std::vector<std::string>& candidate,
                             const std::vector<std::string>& reference) {
  std::vector<long> cand_to_ref(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);
  align_stage(candidate, reference, cand_to_ref, ref_used);
  MeteorAlignment out;
  for (long r : cand_to_ref) out.exact_matches += r >= 0;

  std::vector<std::string> cand_stems, ref_stems;
  for (const auto& w : candidate) cand_stems.push_back(porter_stem(w));
  for (const auto& w : reference) ref_stems.push_back(porter_stem(w));
  align_stage(cand_stems, ref_stems, cand_to_ref, ref_used);

  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (cand_to_ref[i] >= 0) out.pairs.emplace_back(i, static_cast<std::size_t>(cand_to_ref[i]));
  }
  out.matches = out.pairs.size();
  for (std::size_t k = 0; k < out.pairs.size(); ++k) {
    const bool continues = k > 0 && out.pairs[k].first == out.pairs[k - 1].first + 1 &&
                           out.pairs[k].second == out.pairs[k - 1].second + 1;
    if (!continues) ++out.chunks;
  }
  return out;
}

double meteor_lite(std::string_view candidate, std::string_view reference,
                   const MeteorParams& params) {
  const auto cand = tokenize_words(candidate);
  const auto ref = tokenize_words(reference);
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;
  const MeteorAlignment a = meteor_align(cand, ref);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  // A single chunk of exact matches covering both texts carries no penalty.
  const bool identical = a.exact_matches == cand.size() && cand.size() == ref.size() &&
                         a.chunks == 1;
  const double penalty =
      identical ? 0.0 : params.gamma * std::pow(static_cast<double>(a.chunks) / m, params.beta);
  return fmean * (1.0 - penalty);
}

MetricReport evaluate_pairs(const std::vector<TextPair>& pairs) {
  MetricReport report;
  report.n = pairs.size();
  for (const auto& pair : pairs) {
    report.per_pair.push_back({bleu4(pair.candidate, pair.reference),
                               rouge_l(pair.candidate, pair.reference),
                               meteor_lite(pair.candidate, pair.reference)});
  }
  if (report.n > 0) {
    for (const auto& s : report.per_pair) {
      report.corpus.bleu4 += s.bleu4;
      report.corpus.rouge_l += s.rouge_l;
      report.corpus.meteor_lite += s.meteor_lite;
    }
    const double n = static_cast<double>(report.n);
    report.corpus.bleu4 /= n;
    report.corpus.rouge_l /= n;
    report.corpus.meteor_lite /= n;
  }
  return report;
}

std::vector<TextPair> parse_pairs_jsonl(const std::string& text) {
  std::vector<TextPair> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      out.push_back({j.at("candidate").get<std::string>(), j.at("reference").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaViolation,
                  "pairs line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Json metric_report_to_json(const MetricReport& report) {
  auto scores = [](const PairScores& s) {
    return Json{{"bleu4", s.bleu4}, {"rouge_l", s.rouge_l}, {"meteor_lite", s.meteor_lite}};
  };
  Json doc;
  doc["n"] = report.n;
  doc["corpus"] = scores(report.corpus);
  Json per = Json::array();
  for (const auto& s : report.per_pair) per.push_back(scores(s));
  doc["per_pair"] = per;
  return doc;
}

}  // namespace medregion
