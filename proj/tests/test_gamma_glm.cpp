#include <doctest.h>

#include <cmath>

#include "scanpath/gamma_glm.hpp"
#include "scanpath/synth.hpp"
#include "test_util.hpp"

using namespace scanpath;

namespace {

// Composite Simpson rule of f over [a, b].
template <class F>
double simpson(F f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("gamma_logpdf integrates to one and has mean shape * scale") {
  for (double k : {1.0, 1.5, 3.0, 10.0}) {
    for (double s : {0.4, 2.0, 35.0}) {
      const GammaSpec g{k, s};
      // Substitute x = t^2 so the integrand is smooth at the origin for every shape.
      const double hi = std::sqrt(s * (k + 20.0 * std::sqrt(k) + 40.0));
      auto pdf = [&](double t) { return t > 0.0 ? 2.0 * t * std::exp(gamma_logpdf(t * t, g)) : 0.0; };
      CHECK(std::abs(simpson(pdf, 0.0, hi, 20000) - 1.0) < 1e-9);
      CHECK(std::abs(simpson([&](double t) { return t * t * pdf(t); }, 0.0, hi, 20000) / (k * s) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("gamma_logpdf closed forms") {
  // shape 1 is the exponential distribution
  CHECK(gamma_logpdf(3.0, {1.0, 2.0}) == doctest::Approx(-std::log(2.0) - 1.5).epsilon(1e-14));
  // shape 2, scale 1: x e^-x
  CHECK(gamma_logpdf(0.7, {2.0, 1.0}) == doctest::Approx(std::log(0.7) - 0.7).epsilon(1e-14));
  CHECK_THROWS_AS(gamma_logpdf(0.0, {2.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(gamma_logpdf(-1.0, {2.0, 1.0}), std::domain_error);
}

TEST_CASE("link is exp of the inner product, clamped") {
  Eigen::VectorXd w(2);
  w << 1.0, -0.5;
  Eigen::VectorXd x(2);
  x << 0.3, 2.0;
  CHECK(link(x, w) == doctest::Approx(std::exp(0.3 - 1.0)).epsilon(1e-15));
  Eigen::VectorXd big(2);
  big << 500.0, 0.0;
  CHECK(link(big, w) == kLinkMax);
  CHECK(link(-big, w) == kLinkMin);
  CHECK_THROWS_AS(link(Eigen::VectorXd::Ones(3), w), std::invalid_argument);
}

TEST_CASE("model parameters: validation and JSON round trip") {
  testutil::Rng rng(3);
  const ModelParams p = testutil::random_params(rng, 3);
  CHECK_NOTHROW(p.validate());
  const ModelParams back = model_params_from_json(to_json(p));
  CHECK(testutil::pack(back) == testutil::pack(p));
  CHECK(to_json(back) == to_json(p));

  ModelParams bad = p;
  bad.pi[0] += 1e-9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.types[2].dur_scale[1] = std::nan("");
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.types[4].amp_shape.resize(2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(model_params_from_json(nlohmann::json{{"M", 2}}), ParseError);
}

TEST_CASE("sequence log-likelihood is the sum of its parts") {
  testutil::Rng rng(5);
  const ModelParams p = testutil::random_params(rng, 4);
  const auto events = testutil::random_events(rng, 4, 40);
  const LoglikParts parts = loglik_parts(events, p);
  double by_hand = 0.0;
  for (const auto& e : events) {
    by_hand += std::log(p.pi[static_cast<std::size_t>(e.type - 1)]);
    const double ka = std::exp(p.of(e.type).amp_shape.dot(e.launch));
    const double sa = std::exp(p.of(e.type).amp_scale.dot(e.launch));
    const double kd = std::exp(p.of(e.type).dur_shape.dot(e.land));
    const double sd = std::exp(p.of(e.type).dur_scale.dot(e.land));
    const double a = std::abs(e.amplitude);
    by_hand += (ka - 1) * std::log(a) - a / sa - std::lgamma(ka) - ka * std::log(sa);
    by_hand += (kd - 1) * std::log(e.duration) - e.duration / sd - std::lgamma(kd) - kd * std::log(sd);
  }
  CHECK(parts.total() == doctest::Approx(by_hand).epsilon(1e-12));
  CHECK(sequence_loglik(events, p) == doctest::Approx(by_hand).epsilon(1e-12));
  CHECK(sequence_loglik(std::span<const SaccadeEvent>{}, p) == 0.0);
}

TEST_CASE("sampled scanpaths stay on the line and round-trip through extract_events") {
  SynthConfig cfg;
  cfg.num_texts = 2;
  cfg.lines_per_text = 3;
  const SynthCorpus corpus = gen_corpus(cfg);
  const CorpusFeatures features = compute_features(corpus.texts, corpus.freq);
  testutil::Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = static_cast<int>(features.layout.size());
    ModelParams p = trial % 2 ? default_base_params(m, features.layout) : testutil::random_params(rng, m);
    const Text& text = corpus.texts[static_cast<std::size_t>(trial % 2)];
    const int line = trial % 3;
    const auto& tf = features.at(text.text_id);
    const SampledScanpath s = sample_scanpath(p, text, line, tf, {text.lines[line][0].start + 0.5, 200.0}, 25,
                                              1000 + static_cast<std::uint64_t>(trial));
    REQUIRE(s.scanpath.fixations.size() == 25);
    REQUIRE(s.draws.size() == 24);
    for (const auto& f : s.scanpath.fixations) {
      CHECK(f.position >= 0.0);
      CHECK(f.position < text.line_extent(static_cast<std::size_t>(line)));
      CHECK(f.duration > 0.0);
    }
    const auto events = extract_events(s.scanpath, text, tf);
    REQUIRE(events.size() == s.draws.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
      CHECK(events[i].type == s.draws[i].type);
      CHECK(events[i].amplitude == s.draws[i].amplitude);
      CHECK(events[i].duration == s.draws[i].duration);
    }
    const SampledScanpath again = sample_scanpath(p, text, line, tf, {text.lines[line][0].start + 0.5, 200.0}, 25,
                                                  1000 + static_cast<std::uint64_t>(trial));
    CHECK(scanpaths_to_jsonl(std::vector<Scanpath>{again.scanpath}) ==
          scanpaths_to_jsonl(std::vector<Scanpath>{s.scanpath}));
  }
}
