#include <doctest.h>

#include <algorithm>
#include <random>

#include "medregion/error.hpp"
#include "medregion/reports.hpp"

using namespace medregion;

namespace {

const Lexicon& shipped() {
  static const Lexicon lex = Lexicon::load(std::string(MEDREGION_DATA_DIR) + "/lexicon_v1.json");
  return lex;
}

}  // namespace

TEST_CASE("split_sentences: periods, abbreviations, whitespace") {
  CHECK(split_sentences("A b. C d.") == std::vector<std::string>{"A b.", "C d."});
  CHECK(split_sentences("Seen by Dr. Smith. Stable.") ==
        std::vector<std::string>{"Seen by Dr. Smith.", "Stable."});
  CHECK(split_sentences("Nodule e.g. in the apex. Size 4.5 mm.") ==
        std::vector<std::string>{"Nodule e.g. in the apex.", "Size 4.5 mm."});
  CHECK(split_sentences("  One.\n\nTwo  words.  ") == std::vector<std::string>{"One.", "Two words."});
  CHECK(split_sentences("No final period") == std::vector<std::string>{"No final period"});
}

TEST_CASE("lexicon mode: keyword assignment, carry-over, ties, case") {
  const auto r = split_report("Heart size is normal.", std::nullopt, shipped());
  CHECK(r.source == ReportSource::kLexicon);
  CHECK(r.sentences(4) == std::vector<std::string>{"Heart size is normal."});

  const auto carry = split_report("The trachea is patent. No change since prior.", std::nullopt, shipped());
  CHECK(carry.sentences(2) == std::vector<std::string>{"The trachea is patent.", "No change since prior."});

  const auto first = split_report("No change since prior. The LIVER is normal.", std::nullopt, shipped());
  CHECK(first.sentences(1) == std::vector<std::string>{"No change since prior."});
  CHECK(first.sentences(6) == std::vector<std::string>{"The LIVER is normal."});

  const auto lex = Lexicon::from_json_text(R"({"2":["foo"],"5":["bar"]})");
  const auto tie = split_report("foo bar.", std::nullopt, lex);
  CHECK(tie.sentences(2).size() == 1);
  const auto most = split_report("foo bar bar.", std::nullopt, lex);
  CHECK(most.sentences(5).size() == 1);
  // Keywords only match on word boundaries.
  CHECK(lex.hits("food barn")[1] == 0);
  CHECK(lex.hits("Foo-bar")[1] == 1);

  CHECK_THROWS_AS(Lexicon::from_json_text(R"({"7":["x"]})"), Error);
  CHECK_THROWS_AS(Lexicon::from_json_text(R"({"x":["x"]})"), Error);
  CHECK_THROWS_AS(Lexicon::from_json_text("[1]"), Error);
}

TEST_CASE("labeled mode: grouping and label count") {
  const auto r = split_report("S one. S two. S three.", std::vector<int>{1, 1, 6}, shipped());
  CHECK(r.source == ReportSource::kLabeled);
  CHECK(r.sentences(1) == std::vector<std::string>{"S one.", "S two."});
  CHECK(r.sentences(6) == std::vector<std::string>{"S three."});
  CHECK(r.text(1) == "S one. S two.");
  try {
    split_report("S one. S two.", std::vector<int>{1}, shipped());
    FAIL("expected LabelCountMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLabelCountMismatch);
  }
  CHECK_THROWS_AS(split_report("   ", std::nullopt, shipped()), Error);
  CHECK_THROWS_AS(split_report("S.", std::vector<int>{0}, shipped()), Error);

  const auto parsed = parse_labeled_jsonl("{\"sentence\":\"A.\",\"region\":3}\n\n{\"sentence\":\"B.\",\"region\":3}\n");
  CHECK(group_labeled(parsed).sentences(3) == std::vector<std::string>{"A.", "B."});
  CHECK_THROWS_AS(parse_labeled_jsonl("{\"sentence\":\"A.\"}\n"), Error);
  CHECK_THROWS_AS(parse_labeled_jsonl("{\"sentence\":\"A.\",\"region\":9}\n"), Error);
}

TEST_CASE("merge_reports: headers, skipping, completeness") {
  StructuredReport r;
  for (int i = 1; i <= 6; ++i) r.regions[i - 1] = {"Finding " + std::to_string(i) + "."};
  CHECK(merge_reports(r) ==
        "Lungs: Finding 1.\nLarge airways: Finding 2.\nMediastinum: Finding 3.\n"
        "Heart and great vessels: Finding 4.\nOsseous structures: Finding 5.\nUpper abdomen: Finding 6.");
  StructuredReport empty;
  CHECK(merge_reports(empty).empty());
  CHECK(merge_reports(empty, {true}) ==
        "Lungs: Unremarkable.\nLarge airways: Unremarkable.\nMediastinum: Unremarkable.\n"
        "Heart and great vessels: Unremarkable.\nOsseous structures: Unremarkable.\n"
        "Upper abdomen: Unremarkable.");
  StructuredReport some;
  some.regions[2] = {"Nodes are small."};
  CHECK(merge_reports(some) == "Mediastinum: Nodes are small.");
  CHECK(parse_merged_report(merge_reports(some, {true}), true) == some);
  CHECK_THROWS_AS(parse_merged_report("Kidneys: fine."), Error);
}

TEST_CASE("split then merge preserves the sentence multiset for labeled input") {
  std::mt19937 rng(307);
  const std::vector<std::string> pool{"Mild atelectasis.", "No effusion.", "Trachea is midline.",
                                      "Dr. Lee reviewed it.", "Size 4.5 mm.", "Calcified aorta.",
                                      "Old rib fracture.", "Liver cyst."};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> sentences;
    std::vector<int> labels;
    const std::size_t n = 1 + rng() % 10;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      sentences.push_back(pool[rng() % pool.size()]);
      labels.push_back(1 + int(rng() % 6));
      text += (i ? " " : "") + sentences.back();
    }
    const auto split = split_report(text, labels, shipped());
    const auto back = parse_merged_report(merge_reports(split));
    std::vector<std::string> got;
    for (int r = 1; r <= 6; ++r) {
      CHECK(back.sentences(r) == split.sentences(r));
      for (const auto& s : back.sentences(r)) got.push_back(s);
    }
    std::sort(got.begin(), got.end());
    std::sort(sentences.begin(), sentences.end());
    CHECK(got == sentences);
  }
}

TEST_CASE("structured report JSON round trip") {
  const auto r = split_report("Heart size is normal. Liver cyst.", std::nullopt, shipped());
  const Json doc = structured_report_to_json(r);
  CHECK(doc["source"] == "lexicon");
  CHECK(doc["regions"]["4"] == Json::array({"Heart size is normal."}));
  CHECK(structured_report_from_json(doc) == r);
  Json bad = doc;
  bad["source"] = "guess";
  CHECK_THROWS_AS(structured_report_from_json(bad), Error);
  CHECK_THROWS_AS(structured_report_from_json(Json::parse(R"({"regions":{"8":["x"]}})")), Error);
}
