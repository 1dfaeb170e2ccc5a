#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "scanpath/synth.hpp"
#include "test_util.hpp"

using namespace scanpath;

TEST_CASE("corpus generation is seed-stable and matches the scale knobs") {
  SynthConfig cfg;
  const SynthCorpus a = gen_corpus(cfg);
  const SynthCorpus b = gen_corpus(cfg);
  CHECK(a.freq.to_tsv() == b.freq.to_tsv());
  REQUIRE(a.texts.size() == 12);
  for (std::size_t i = 0; i < a.texts.size(); ++i) CHECK(to_json(a.texts[i]) == to_json(b.texts[i]));
  cfg.seed = 2;
  CHECK(to_json(gen_corpus(cfg).texts[0]) != to_json(a.texts[0]));

  double words = 0.0;
  for (const auto& t : a.texts) {
    CHECK(t.lines.size() == 10);
    words += static_cast<double>(t.word_count());
    for (const auto& line : t.lines) {
      CHECK(line.size() >= 14);
      CHECK(line.size() <= 18);
      for (const auto& w : line) {
        CHECK(w.token.size() >= 2);
        CHECK(w.token.size() <= 12);
      }
    }
    // Round trip through the text parser keeps the corpus valid.
    CHECK_NOTHROW(parse_text(to_json(t)));
  }
  CHECK(words / 12.0 == doctest::Approx(160.0).epsilon(0.1));
}

TEST_CASE("frequency table follows the configured Zipf exponent") {
  for (double s : {0.8, 1.0, 1.2}) {
    SynthConfig cfg;
    cfg.zipf_exponent = s;
    const SynthCorpus c = gen_corpus(cfg);
    std::vector<double> counts;
    for (const auto& [token, n] : c.freq.counts()) counts.push_back(n);
    std::sort(counts.rbegin(), counts.rend());
    // Least squares of log count on log rank.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(counts.size());
    for (std::size_t r = 0; r < counts.size(); ++r) {
      const double x = std::log(r + 1.0);
      const double y = std::log(counts[r]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(std::abs(slope + s) < 0.15);
  }
}

TEST_CASE("reader generation: sigma 0 copies the base, pi stays on the simplex") {
  SynthConfig cfg;
  cfg.num_readers = 6;
  const ModelParams base = default_base_params(6);
  CHECK_NOTHROW(base.validate());
  cfg.reader_sigma = 0.0;
  for (const auto& r : gen_readers(cfg, base)) CHECK(testutil::pack(r) == testutil::pack(base));
  for (double sigma : {0.1, 0.5, 2.0}) {
    cfg.reader_sigma = sigma;
    for (const auto& r : gen_readers(cfg, base)) {
      CHECK_NOTHROW(r.validate());
      for (double p : r.pi) CHECK(p > 0.0);
    }
  }
}

TEST_CASE("pairwise reader distances grow with sigma") {
  const ModelParams base = default_base_params(4);
  std::vector<double> mean_distance;
  for (double sigma : {0.5, 1.0, 2.0}) {
    double total = 0.0;
    int pairs = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      SynthConfig cfg;
      cfg.num_readers = 8;
      cfg.reader_sigma = sigma;
      cfg.seed = seed;
      const auto readers = gen_readers(cfg, base);
      for (std::size_t i = 0; i < readers.size(); ++i) {
        for (std::size_t j = i + 1; j < readers.size(); ++j) {
          total += (testutil::pack(readers[i]) - testutil::pack(readers[j])).norm();
          ++pairs;
        }
      }
    }
    mean_distance.push_back(total / pairs);
  }
  CHECK(mean_distance[0] < mean_distance[1]);
  CHECK(mean_distance[1] < mean_distance[2]);
}

TEST_CASE("dataset: one scanpath per reader, text and line; sampler draws round-trip") {
  SynthConfig cfg;
  cfg.num_readers = 3;
  cfg.num_texts = 4;
  cfg.lines_per_text = 5;
  cfg.seed = 42;
  const SynthDataset d = gen_dataset(cfg);
  CHECK(d.scanpaths.size() == 3 * 4 * 5);
  std::map<std::tuple<std::string, std::string, int>, int> seen;
  for (std::size_t i = 0; i < d.scanpaths.size(); ++i) {
    const auto& s = d.scanpaths[i];
    seen[{s.reader_id, s.text_id, s.line_id}]++;
    CHECK(s.label == s.reader_id);
    CHECK(s.fixations.size() >= static_cast<std::size_t>(cfg.fixations_min));
    CHECK(s.fixations.size() <= static_cast<std::size_t>(cfg.fixations_max));
    std::vector<int> cols(static_cast<std::size_t>(cfg.num_features));
    std::iota(cols.begin(), cols.end(), 0);
    const CorpusFeatures truth = select_columns(d.features, cols);
    const Text& text = *std::find_if(d.corpus.texts.begin(), d.corpus.texts.end(),
                                     [&](const Text& t) { return t.text_id == s.text_id; });
    const auto events = extract_events(s, text, truth.at(s.text_id));
    REQUIRE(events.size() == d.draws[i].size());
    for (std::size_t k = 0; k < events.size(); ++k) {
      CHECK(events[k].type == d.draws[i][k].type);
      CHECK(events[k].amplitude == d.draws[i][k].amplitude);
      CHECK(events[k].duration == d.draws[i][k].duration);
    }
  }
  CHECK(seen.size() == d.scanpaths.size());

  const SynthDataset again = gen_dataset(cfg);
  CHECK(scanpaths_to_jsonl(again.scanpaths) == scanpaths_to_jsonl(d.scanpaths));
  CHECK(ground_truth_json(again) == ground_truth_json(d));
  const auto truth = ground_truth_json(d);
  CHECK(truth.at("readers").size() == 3);
  CHECK(model_params_from_json(truth["readers"][1]["model"]).layout.size() == 6);
}

TEST_CASE("comprehension labels are binary and constant per reader and text") {
  SynthConfig cfg;
  cfg.num_readers = 6;
  cfg.num_texts = 4;
  cfg.lines_per_text = 2;
  cfg.comprehension_labels = true;
  const SynthDataset d = gen_dataset(cfg);
  std::map<std::pair<std::string, std::string>, std::string> labels;
  std::map<std::string, int> counts;
  for (const auto& s : d.scanpaths) {
    REQUIRE(s.label);
    CHECK((*s.label == "high" || *s.label == "low"));
    auto [it, inserted] = labels.emplace(std::make_pair(s.reader_id, s.text_id), *s.label);
    CHECK(it->second == *s.label);
    counts[*s.label]++;
  }
  CHECK(counts.size() == 2);
}

TEST_CASE("model-level event draws follow pi and the type's sign") {
  testutil::Rng rng(4);
  const ModelParams p = default_base_params(3);
  const Eigen::MatrixXd pool = testutil::random_pool(rng, 3, 50);
  const auto events = sample_events(p, pool, 20000, rng);
  std::array<double, 5> freq{};
  for (const auto& e : events) {
    freq[static_cast<std::size_t>(e.type - 1)] += 1.0 / 20000.0;
    CHECK((e.amplitude < 0.0) == (e.type == 1 || e.type == 5));
    CHECK(e.duration > 0.0);
  }
  for (std::size_t u = 0; u < 5; ++u) CHECK(std::abs(freq[u] - p.pi[u]) < 0.015);
  CHECK_THROWS_AS(sample_events(p, Eigen::MatrixXd::Ones(4, 2), 1, rng), std::invalid_argument);
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.reader_sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.num_texts = 0;
  CHECK_THROWS_AS(gen_corpus(cfg), std::invalid_argument);
  cfg = {};
  CHECK(to_json(synth_config_from_json(to_json(cfg))) == to_json(cfg));
}
