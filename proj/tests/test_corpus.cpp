#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "scanpath/corpus.hpp"
#include "scanpath/hashing.hpp"

using namespace scanpath;
using nlohmann::json;

namespace {

json word(const std::string& token, int start, int end, std::vector<std::string> flags = {}) {
  return {{"token", token}, {"start", start}, {"end", end}, {"flags", flags}};
}

json small_text() {
  return {{"text_id", "t1"},
          {"lines",
           {{word("The", 0, 3, {"sentence_initial"}), word("quick", 4, 9), word("fox", 10, 13)},
            {word("jumped", 0, 6), word("photosynthesis", 7, 21, {"technical_term"})}}}};
}

}  // namespace

TEST_CASE("parse_text reads spans, fills syllables and sorts flags") {
  json j = small_text();
  j["lines"][0][1]["flags"] = {"zeta", "alpha"};
  j["lines"][0][2]["syllables"] = 3;
  const Text t = parse_text(j);
  CHECK(t.text_id == "t1");
  REQUIRE(t.lines.size() == 2);
  CHECK(t.word_count() == 5);
  CHECK(t.lines[0][1].flags == std::vector<std::string>{"alpha", "zeta"});
  CHECK(*t.lines[0][2].syllables == 3);
  CHECK(*t.lines[0][1].syllables == estimate_syllables("quick"));
  CHECK(t.line_extent(0) == 13);
}

TEST_CASE("parse_text rejects malformed input with a location") {
  SUBCASE("empty line") {
    json j = small_text();
    j["lines"][1] = json::array();
    try {
      parse_text(j);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("empty line") != std::string::npos);
      CHECK(e.line_index() == 1);
    }
  }
  SUBCASE("overlapping spans") {
    json j = small_text();
    j["lines"][0][1]["start"] = 2;
    try {
      parse_text(j);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("overlapping") != std::string::npos);
      CHECK(e.line_index() == 0);
      CHECK(e.word_index() == 1);
    }
  }
  SUBCASE("unsorted spans") {
    json j = small_text();
    j["lines"][0] = {word("b", 5, 6), word("a", 0, 1)};
    CHECK_THROWS_WITH_AS(parse_text(j), doctest::Contains("not sorted"), ParseError);
  }
  SUBCASE("missing fields") {
    CHECK_THROWS_AS(parse_text(json{{"lines", json::array()}}), ParseError);
    CHECK_THROWS_AS(parse_text(json{{"text_id", "x"}, {"lines", json::array()}}), ParseError);
    json j = small_text();
    j["lines"][0][0].erase("end");
    CHECK_THROWS_AS(parse_text(j), ParseError);
  }
}

TEST_CASE("text JSON round trip") {
  const Text t = parse_text(small_text());
  const Text back = parse_text(to_json(t));
  CHECK(to_json(back) == to_json(t));
}

TEST_CASE("load_texts accepts an object or an array and rejects duplicate ids") {
  const auto dir = std::filesystem::temp_directory_path() / "scanpath_corpus_test";
  write_file(dir / "one.json", small_text().dump());
  CHECK(load_texts(dir / "one.json").size() == 1);
  json b = small_text();
  b["text_id"] = "t2";
  write_file(dir / "two.json", json::array({small_text(), b}).dump());
  CHECK(load_texts(dir / "two.json").size() == 2);
  write_file(dir / "dup.json", json::array({small_text(), small_text()}).dump());
  CHECK_THROWS_AS(load_texts(dir / "dup.json"), ParseError);
  write_file(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(load_texts(dir / "bad.json"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("syllable estimate counts vowel groups") {
  CHECK(estimate_syllables("cat") == 1);
  CHECK(estimate_syllables("reading") == 2);
  CHECK(estimate_syllables("rhythm") == 1);
  CHECK(estimate_syllables("banana") == 3);
  CHECK(estimate_syllables("xyz") == 1);
  CHECK(estimate_syllables("brr") == 1);
}

TEST_CASE("frequency table: floor for unknown tokens and TSV round trip") {
  FrequencyTable f(2e6);
  f.set_count("the", 1e5);
  f.set_count("fox", 20);
  CHECK(f.count("the") == 1e5);
  CHECK(f.count("unseen") == 1.0);
  CHECK(f.per_million("fox") == doctest::Approx(10.0));
  const FrequencyTable back = FrequencyTable::parse(f.to_tsv());
  CHECK(back.total() == 2e6);
  CHECK(back.count("fox") == 20);
  CHECK(back.to_tsv() == f.to_tsv());
  CHECK_THROWS_AS(FrequencyTable::parse("the\t5\n"), ParseError);
  CHECK_THROWS_AS(FrequencyTable::parse("#total\t100\nthe five\n"), ParseError);
  CHECK_THROWS_AS(FrequencyTable::parse(""), ParseError);
}

TEST_CASE("compute_features: layout, bias, z-scores and raw flags") {
  const std::vector<Text> texts{parse_text(small_text())};
  FrequencyTable f(1e6);
  f.set_count("The", 50000);
  f.set_count("quick", 300);
  f.set_count("fox", 80);
  f.set_count("jumped", 120);
  const CorpusFeatures cf = compute_features(texts, f);
  const std::vector<std::string> layout{"bias", "log_frequency", "log_length_chars", "log_length_syllables",
                                        "flag:sentence_initial", "flag:technical_term"};
  CHECK(cf.layout == layout);
  const auto& tf = cf.at("t1");
  REQUIRE(tf.lines.size() == 2);
  Eigen::MatrixXd all(5, 6);
  all << tf.lines[0], tf.lines[1];
  CHECK(all.col(0).isOnes());
  for (int c = 1; c <= 3; ++c) {
    // Training z-scores have mean 0 and population std 1.
    CHECK(all.col(c).mean() == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    const double var = (all.col(c).array() - all.col(c).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(all(0, 4) == 1.0);
  CHECK(all.col(4).sum() == 1.0);
  CHECK(all(4, 5) == 1.0);
  CHECK(all.col(5).sum() == 1.0);
  // Word 1 of line 0 is "quick": z-score of log length against the text's stats.
  const double mean_len = (std::log(3.0) + std::log(5.0) + std::log(3.0) + std::log(6.0) + std::log(14.0)) / 5.0;
  CHECK(all(1, 2) == doctest::Approx((std::log(5.0) - mean_len) / cf.stats.stddev[1]));
}

TEST_CASE("compute_features: constant components become zero and held-out texts reuse statistics") {
  json j = {{"text_id", "c"}, {"lines", {{word("ab", 0, 2), word("cd", 3, 5)}}}};
  const std::vector<Text> texts{parse_text(j)};
  FrequencyTable f;
  const CorpusFeatures cf = compute_features(texts, f);
  const auto& m = cf.at("c").lines[0];
  CHECK(m.col(1).isZero());
  CHECK(m.col(2).isZero());
  CHECK(m.col(3).isZero());

  const std::vector<Text> train{parse_text(small_text())};
  const CorpusFeatures tr = compute_features(train, f);
  const CorpusFeatures held = compute_features(texts, f, tr.stats);
  CHECK(held.layout == tr.layout);
  CHECK(held.at("c").lines[0](0, 2) == doctest::Approx((std::log(2.0) - tr.stats.mean[1]) / tr.stats.stddev[1]));

  const NormStats back = norm_stats_from_json(to_json(tr.stats));
  CHECK(back.mean == tr.stats.mean);
  CHECK(back.flags == tr.stats.flags);
}

TEST_CASE("select_columns keeps the bias and rejects bad selections") {
  const std::vector<Text> texts{parse_text(small_text())};
  const CorpusFeatures cf = compute_features(texts, FrequencyTable());
  const std::vector<int> cols{0, 2, 5};
  const CorpusFeatures sel = select_columns(cf, cols);
  CHECK(sel.layout == std::vector<std::string>{"bias", "log_length_chars", "flag:technical_term"});
  CHECK(sel.at("t1").lines[1].col(1) == cf.at("t1").lines[1].col(2));
  const std::vector<int> no_bias{1, 2};
  const std::vector<int> unsorted{0, 3, 2};
  const std::vector<int> out_of_range{0, 9};
  CHECK_THROWS_AS(select_columns(cf, no_bias), std::invalid_argument);
  CHECK_THROWS_AS(select_columns(cf, unsorted), std::invalid_argument);
  CHECK_THROWS_AS(select_columns(cf, out_of_range), std::invalid_argument);
}
