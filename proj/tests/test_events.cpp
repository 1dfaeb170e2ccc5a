#include <doctest.h>

#include <cmath>

#include "scanpath/corpus.hpp"
#include "scanpath/events.hpp"
#include "scanpath/random.hpp"

using namespace scanpath;

namespace {

Line make_line(const std::vector<std::pair<int, int>>& spans) {
  Line line;
  for (const auto& [s, e] : spans) {
    Word w;
    w.token = std::string(static_cast<std::size_t>(e - s), 'a');
    w.start = s;
    w.end = e;
    w.syllables = 1;
    line.push_back(w);
  }
  return line;
}

Text make_text(std::vector<Line> lines) {
  Text t;
  t.text_id = "t";
  t.lines = std::move(lines);
  return t;
}

// Oracle: the last word whose start is <= q, or word 0 before any word.
std::size_t brute_word_at(const Line& line, double q) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i].start <= q) idx = i;
  }
  return idx;
}

}  // namespace

TEST_CASE("word_at maps whitespace to the preceding word") {
  const Line line = make_line({{2, 5}, {6, 9}, {12, 20}});
  CHECK(word_at(line, 0.0) == 0);
  CHECK(word_at(line, 4.9) == 0);
  CHECK(word_at(line, 5.5) == 0);
  CHECK(word_at(line, 6.0) == 1);
  CHECK(word_at(line, 11.0) == 1);
  CHECK(word_at(line, 19.9) == 2);
  CHECK_THROWS_AS(word_at(line, 20.0), std::out_of_range);
  CHECK_THROWS_AS(word_at(line, -0.1), std::out_of_range);
}

TEST_CASE("word_at agrees with a linear scan on random lines") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<int, int>> spans;
    int pos = uniform_int(rng, 0, 3);
    const int n = uniform_int(rng, 1, 12);
    for (int i = 0; i < n; ++i) {
      const int len = uniform_int(rng, 1, 9);
      spans.push_back({pos, pos + len});
      pos += len + uniform_int(rng, 0, 3);
    }
    const Line line = make_line(spans);
    for (int k = 0; k < 50; ++k) {
      const double q = uniform01(rng) * line.back().end;
      CHECK(word_at(line, q) == brute_word_at(line, q));
    }
  }
}

TEST_CASE("saccade types follow the word indices") {
  const Line line = make_line({{0, 4}, {5, 8}, {9, 15}, {16, 20}});
  CHECK(classify_saccade(line, 3.0, 1.0) == 1);
  CHECK(classify_saccade(line, 1.0, 3.0) == 2);
  CHECK(classify_saccade(line, 2.0, 2.0) == 2);
  CHECK(classify_saccade(line, 2.0, 6.0) == 3);
  CHECK(classify_saccade(line, 4.5, 5.0) == 3);
  CHECK(classify_saccade(line, 2.0, 10.0) == 4);
  CHECK(classify_saccade(line, 10.0, 2.0) == 5);
  CHECK(classify_saccade(line, 17.0, 6.0) == 5);
  const Text text = make_text({line});
  CHECK(classify_saccade(text, 0, 2.0, 17.0) == 4);
  CHECK_THROWS_AS(classify_saccade(text, 1, 2.0, 3.0), std::out_of_range);
}

TEST_CASE("amplitude floor") {
  CHECK(clamp_amplitude(0.0) == 0.5);
  CHECK(clamp_amplitude(0.2) == 0.5);
  CHECK(clamp_amplitude(-0.2) == -0.5);
  CHECK(clamp_amplitude(-3.0) == -3.0);
  CHECK(clamp_amplitude(0.5) == 0.5);
}

TEST_CASE("extract_events builds one event per saccade with launch and landing features") {
  const Text text = make_text({make_line({{0, 4}, {5, 8}, {9, 15}, {16, 20}})});
  TextFeatures tf;
  tf.text_id = "t";
  Eigen::MatrixXd m(4, 2);
  m << 1, 10, 1, 11, 1, 12, 1, 13;
  tf.lines.push_back(m);
  Scanpath s;
  s.reader_id = "r";
  s.text_id = "t";
  s.line_id = 0;
  s.fixations = {{1.0, 100}, {1.2, 110}, {6.0, 120}, {17.0, 130}, {10.0, 140}, {9.5, 150}};
  const auto events = extract_events(s, text, tf);
  REQUIRE(events.size() == 5);
  const std::vector<int> types{2, 3, 4, 5, 1};
  const std::vector<double> amps{0.5, 4.8, 11.0, -7.0, -0.5};
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].type == types[i]);
    CHECK(events[i].amplitude == doctest::Approx(amps[i]).epsilon(1e-12));
    CHECK(events[i].duration == s.fixations[i + 1].duration);
    CHECK(std::abs(events[i].amplitude) >= kAmplitudeFloor);
  }
  CHECK(events[1].launch[1] == 10);
  CHECK(events[1].land[1] == 11);
  CHECK(events[3].launch[1] == 13);
  CHECK(events[3].land[1] == 12);

  Scanpath one = s;
  one.fixations.resize(1);
  CHECK(extract_events(one, text, tf).empty());
  Scanpath outside = s;
  outside.fixations.push_back({25.0, 100});
  CHECK_THROWS_AS(extract_events(outside, text, tf), std::out_of_range);
  Scanpath bad_line = s;
  bad_line.line_id = 3;
  CHECK_THROWS_AS(extract_events(bad_line, text, tf), std::out_of_range);
}

TEST_CASE("scanpath JSONL round trip and validation") {
  Scanpath s;
  s.reader_id = "r1";
  s.text_id = "t";
  s.line_id = 2;
  s.label = "high";
  s.fixations = {{0.25, 180.5}, {7.0, 210.0}};
  Scanpath u = s;
  u.label.reset();
  const std::vector<Scanpath> v{s, u};
  const std::string jsonl = scanpaths_to_jsonl(v);
  const auto back = parse_scanpaths(jsonl);
  REQUIRE(back.size() == 2);
  CHECK(*back[0].label == "high");
  CHECK(!back[1].label);
  CHECK(back[0].fixations[0].position == 0.25);
  CHECK(scanpaths_to_jsonl(back) == jsonl);

  CHECK(parse_scanpath(nlohmann::json::parse(R"({"reader_id":"r","text_id":"t","line_id":0,"label":1,"fixations":[]})"))
            .label == "1");
  CHECK_THROWS_AS(parse_scanpaths("{\"reader_id\": 3}\n"), ParseError);
  CHECK_THROWS_AS(parse_scanpaths(R"({"reader_id":"r","text_id":"t","line_id":0,"fixations":[[1,-5]]})"), ParseError);
  CHECK_THROWS_AS(parse_scanpaths("not json\n"), ParseError);
}
