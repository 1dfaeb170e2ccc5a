#include "scanpath/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "scanpath/parallel.hpp"

namespace scanpath {

using nlohmann::json;

void SynthConfig::validate() const {
  if (num_readers < 1 || num_texts < 1 || lines_per_text < 1) {
    throw std::invalid_argument("synth: reader/text/line counts must be >= 1");
  }
  if (words_per_line_min < 2 || words_per_line_max < words_per_line_min) {
    throw std::invalid_argument("synth: words per line must satisfy 2 <= min <= max");
  }
  if (num_features < 1 || num_features > 6) throw std::invalid_argument("synth: num_features must be in [1, 6]");
  if (!(reader_sigma >= 0.0)) throw std::invalid_argument("synth: reader_sigma must be >= 0");
  if (fixations_min < 2 || fixations_max < fixations_min) {
    throw std::invalid_argument("synth: fixation counts must satisfy 2 <= min <= max");
  }
  if (vocabulary < 1) throw std::invalid_argument("synth: vocabulary must be >= 1");
  if (!(zipf_exponent > 0.0)) throw std::invalid_argument("synth: zipf exponent must be > 0");
  if (!(total_tokens > 0.0)) throw std::invalid_argument("synth: total_tokens must be > 0");
}

json to_json(const SynthConfig& c) {
  return {{"num_readers", c.num_readers},
          {"num_texts", c.num_texts},
          {"lines_per_text", c.lines_per_text},
          {"words_per_line_min", c.words_per_line_min},
          {"words_per_line_max", c.words_per_line_max},
          {"num_features", c.num_features},
          {"reader_sigma", c.reader_sigma},
          {"fixations_min", c.fixations_min},
          {"fixations_max", c.fixations_max},
          {"vocabulary", c.vocabulary},
          {"zipf_exponent", c.zipf_exponent},
          {"total_tokens", c.total_tokens},
          {"technical_rate", c.technical_rate},
          {"sentence_rate", c.sentence_rate},
          {"comprehension_labels", c.comprehension_labels},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  read("num_readers", c.num_readers);
  read("num_texts", c.num_texts);
  read("lines_per_text", c.lines_per_text);
  read("words_per_line_min", c.words_per_line_min);
  read("words_per_line_max", c.words_per_line_max);
  read("num_features", c.num_features);
  read("reader_sigma", c.reader_sigma);
  read("fixations_min", c.fixations_min);
  read("fixations_max", c.fixations_max);
  read("vocabulary", c.vocabulary);
  read("zipf_exponent", c.zipf_exponent);
  read("total_tokens", c.total_tokens);
  read("technical_rate", c.technical_rate);
  read("sentence_rate", c.sentence_rate);
  read("comprehension_labels", c.comprehension_labels);
  read("seed", c.seed);
  c.validate();
  return c;
}

namespace {

constexpr std::uint64_t kCorpusStream = 0;
constexpr std::uint64_t kReaderStream = 1'000'000;
constexpr std::uint64_t kLabelStream = 2'000'000;
constexpr std::uint64_t kPathStream = 3'000'000;

std::string random_token(Rng& rng, int length) {
  static constexpr char kConsonants[] = "bcdfghjklmnprstvwz";
  static constexpr char kVowels[] = "aeiou";
  std::string s;
  for (int i = 0; i < length; ++i) {
    if (uniform01(rng) < 0.4) {
      s.push_back(kVowels[uniform_int(rng, 0, 4)]);
    } else {
      s.push_back(kConsonants[uniform_int(rng, 0, 17)]);
    }
  }
  return s;
}

std::string numbered(const char* prefix, int i, int count) {
  const int width = std::max(2, static_cast<int>(std::to_string(std::max(count - 1, 0)).size()));
  std::string n = std::to_string(i);
  return prefix + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(n.size()))), '0') + n;
}

}  // namespace

SynthCorpus gen_corpus(const SynthConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, kCorpusStream));
  const int v = config.vocabulary;

  std::vector<std::string> vocab;
  std::vector<bool> technical;
  std::set<std::string> seen;
  for (int r = 0; r < v; ++r) {
    // Frequent words tend to be short.
    const int base = 2 + uniform_int(rng, 0, 3) + static_cast<int>(0.6 * std::log2(r + 1.0));
    const int length = std::clamp(base, 2, 12);
    std::string token;
    do {
      token = random_token(rng, length);
    } while (!seen.insert(token).second);
    vocab.push_back(std::move(token));
    technical.push_back(uniform01(rng) < config.technical_rate);
  }

  std::vector<double> weights(static_cast<std::size_t>(v));
  double norm = 0.0;
  for (int r = 0; r < v; ++r) {
    weights[static_cast<std::size_t>(r)] = std::pow(r + 1.0, -config.zipf_exponent);
    norm += weights[static_cast<std::size_t>(r)];
  }
  SynthCorpus out{{}, FrequencyTable(config.total_tokens)};
  for (int r = 0; r < v; ++r) {
    const double count = std::max(1.0, std::round(config.total_tokens * weights[static_cast<std::size_t>(r)] / norm));
    out.freq.set_count(vocab[static_cast<std::size_t>(r)], count);
  }
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());

  for (int x = 0; x < config.num_texts; ++x) {
    Text text;
    text.text_id = numbered("text", x, config.num_texts);
    bool sentence_start = true;
    for (int l = 0; l < config.lines_per_text; ++l) {
      Line line;
      const int words = uniform_int(rng, config.words_per_line_min, config.words_per_line_max);
      int pos = 0;
      for (int w = 0; w < words; ++w) {
        const double target = uniform01(rng) * cumulative.back();
        const auto idx = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), target) - cumulative.begin(),
                                     v - 1));
        Word word;
        word.token = vocab[idx];
        word.start = pos;
        word.end = pos + static_cast<int>(word.token.size());
        word.syllables = estimate_syllables(word.token);
        if (sentence_start) word.flags.push_back("sentence_initial");
        if (technical[idx]) word.flags.push_back("technical_term");
        std::sort(word.flags.begin(), word.flags.end());
        pos = word.end + 1;
        line.push_back(std::move(word));
        sentence_start = uniform01(rng) < config.sentence_rate;
      }
      text.lines.push_back(std::move(line));
    }
    out.texts.push_back(std::move(text));
  }
  return out;
}

ModelParams default_base_params(int m, std::vector<std::string> layout) {
  if (m < 1 || m > 6) throw std::invalid_argument("default_base_params: m must be in [1, 6]");
  ModelParams p = ModelParams::zeros(m, std::move(layout));
  p.pi = {0.06, 0.08, 0.52, 0.18, 0.16};
  struct Bias {
    double amp_shape, amp_scale, dur_shape, dur_scale;
  };
  const std::array<Bias, kNumSaccadeTypes> bias = {{
      {2.0, 0.8, 6.0, 30.0},
      {2.0, 1.0, 6.0, 32.0},
      {4.0, 1.8, 7.0, 32.0},
      {5.0, 2.6, 7.0, 36.0},
      {2.5, 4.0, 5.0, 50.0},
  }};
  // Columns: bias, log frequency, log chars, log syllables, sentence-initial, technical term.
  const std::array<double, 6> amp_shape_w = {0.0, 0.05, -0.05, 0.03, 0.0, -0.05};
  const std::array<double, 6> amp_scale_w = {0.0, 0.10, 0.15, -0.05, 0.05, -0.10};
  const std::array<double, 6> dur_shape_w = {0.0, 0.05, -0.05, 0.02, 0.0, -0.05};
  const std::array<double, 6> dur_scale_w = {0.0, -0.10, 0.10, 0.05, 0.05, 0.15};
  for (int u = 0; u < kNumSaccadeTypes; ++u) {
    auto& t = p.types[static_cast<std::size_t>(u)];
    const auto& b = bias[static_cast<std::size_t>(u)];
    for (int c = 1; c < m; ++c) {
      t.amp_shape[c] = amp_shape_w[static_cast<std::size_t>(c)];
      t.amp_scale[c] = amp_scale_w[static_cast<std::size_t>(c)];
      t.dur_shape[c] = dur_shape_w[static_cast<std::size_t>(c)];
      t.dur_scale[c] = dur_scale_w[static_cast<std::size_t>(c)];
    }
    t.amp_shape[0] = std::log(b.amp_shape);
    t.amp_scale[0] = std::log(b.amp_scale);
    t.dur_shape[0] = std::log(b.dur_shape);
    t.dur_scale[0] = std::log(b.dur_scale);
  }
  return p;
}

std::vector<ModelParams> gen_readers(const SynthConfig& config, const ModelParams& base) {
  config.validate();
  base.validate();
  std::vector<ModelParams> readers(static_cast<std::size_t>(config.num_readers));
  parallel_for(readers.size(), [&](std::size_t r) {
    Rng rng(derive_seed(config.seed, kReaderStream + r));
    ModelParams p = base;
    const double sigma = config.reader_sigma;
    if (sigma > 0.0) {
      for (auto& t : p.types) {
        for (Eigen::VectorXd* v : {&t.amp_shape, &t.amp_scale, &t.dur_shape, &t.dur_scale}) {
          for (Eigen::Index k = 0; k < v->size(); ++k) (*v)[k] += sample_normal(rng, 0.0, sigma);
        }
      }
      const double concentration = 10.0 / (sigma * sigma);
      double sum = 0.0;
      for (std::size_t u = 0; u < kNumSaccadeTypes; ++u) {
        p.pi[u] = std::max(sample_gamma(rng, concentration * base.pi[u], 1.0), 1e-300);
        sum += p.pi[u];
      }
      for (auto& v : p.pi) v /= sum;
      // Fold the rounding residue into the largest entry so the sum is 1 to the last ulp.
      double total = 0.0;
      for (double v : p.pi) total += v;
      *std::max_element(p.pi.begin(), p.pi.end()) += 1.0 - total;
    }
    readers[r] = std::move(p);
  });
  return readers;
}

SynthDataset gen_dataset(const SynthConfig& config) {
  config.validate();
  SynthDataset out;
  out.config = config;
  out.corpus = gen_corpus(config);
  out.features = compute_features(out.corpus.texts, out.corpus.freq);
  std::vector<int> columns(static_cast<std::size_t>(config.num_features));
  std::iota(columns.begin(), columns.end(), 0);
  const CorpusFeatures truth_features = select_columns(out.features, columns);
  out.base = default_base_params(config.num_features, truth_features.layout);
  out.readers = gen_readers(config, out.base);
  for (int r = 0; r < config.num_readers; ++r) out.reader_ids.push_back(numbered("reader", r, config.num_readers));

  // Comprehension classes from reader ability minus text difficulty.
  std::vector<std::string> comprehension;
  if (config.comprehension_labels) {
    Rng rng(derive_seed(config.seed, kLabelStream));
    std::vector<double> ability(static_cast<std::size_t>(config.num_readers));
    std::vector<double> difficulty(static_cast<std::size_t>(config.num_texts));
    for (auto& a : ability) a = sample_normal(rng);
    for (auto& d : difficulty) d = sample_normal(rng);
    for (int r = 0; r < config.num_readers; ++r) {
      for (int x = 0; x < config.num_texts; ++x) {
        const double logit = ability[static_cast<std::size_t>(r)] - difficulty[static_cast<std::size_t>(x)] + 0.8;
        const double p = 1.0 / (1.0 + std::exp(-logit));
        comprehension.push_back(uniform01(rng) < p ? "high" : "low");
      }
    }
  }

  const std::size_t per_reader = static_cast<std::size_t>(config.num_texts * config.lines_per_text);
  out.scanpaths.resize(per_reader * static_cast<std::size_t>(config.num_readers));
  out.draws.resize(out.scanpaths.size());
  parallel_for(static_cast<std::size_t>(config.num_readers), [&](std::size_t r) {
    for (int x = 0; x < config.num_texts; ++x) {
      const Text& text = out.corpus.texts[static_cast<std::size_t>(x)];
      const TextFeatures& tf = truth_features.at(text.text_id);
      for (int l = 0; l < config.lines_per_text; ++l) {
        const std::size_t idx = r * per_reader + static_cast<std::size_t>(x * config.lines_per_text + l);
        Rng rng(derive_seed(config.seed, kPathStream + idx));
        const int length = uniform_int(rng, config.fixations_min, config.fixations_max);
        const Word& first = text.lines[static_cast<std::size_t>(l)].front();
        const double q0 = first.start + uniform01(rng) * first.length();
        const GammaSpec d0 = out.readers[r].duration_spec(3, tf.lines[static_cast<std::size_t>(l)].row(0).transpose());
        const double dur0 = std::max(sample_gamma(rng, d0.shape, d0.scale), 1e-6);
        SampledScanpath s = sample_scanpath(out.readers[r], text, l, tf, {q0, dur0}, length, rng());
        s.scanpath.reader_id = out.reader_ids[r];
        if (config.comprehension_labels) {
          s.scanpath.label = comprehension[r * static_cast<std::size_t>(config.num_texts) + static_cast<std::size_t>(x)];
        } else {
          s.scanpath.label = out.reader_ids[r];
        }
        out.scanpaths[idx] = std::move(s.scanpath);
        out.draws[idx] = std::move(s.draws);
      }
    }
  });
  return out;
}

json ground_truth_json(const SynthDataset& data) {
  json readers = json::array();
  for (std::size_t r = 0; r < data.readers.size(); ++r) {
    readers.push_back({{"reader_id", data.reader_ids[r]}, {"model", to_json(data.readers[r])}});
  }
  return {{"config", to_json(data.config)},
          {"norm", to_json(data.features.stats)},
          {"base", to_json(data.base)},
          {"readers", std::move(readers)}};
}

std::vector<SaccadeEvent> sample_type_events(const ModelParams& params, int type,
                                             const Eigen::MatrixXd& pool, std::size_t n, Rng& rng) {
  if (pool.rows() < 1 || pool.cols() != params.dimension()) {
    throw std::invalid_argument("sample_events: feature pool shape does not match the model");
  }
  std::vector<SaccadeEvent> out;
  out.reserve(n);
  const int rows = static_cast<int>(pool.rows());
  for (std::size_t i = 0; i < n; ++i) {
    SaccadeEvent e;
    e.type = type;
    e.launch = pool.row(uniform_int(rng, 0, rows - 1)).transpose();
    e.land = pool.row(uniform_int(rng, 0, rows - 1)).transpose();
    const GammaSpec a = params.amplitude_spec(type, e.launch);
    const GammaSpec d = params.duration_spec(type, e.land);
    double mag = 0.0;
    do {
      mag = sample_gamma(rng, a.shape, a.scale);
    } while (!(mag > 0.0));
    e.amplitude = (type == 1 || type == 5) ? -mag : mag;
    do {
      e.duration = sample_gamma(rng, d.shape, d.scale);
    } while (!(e.duration > 0.0));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<SaccadeEvent> sample_events(const ModelParams& params, const Eigen::MatrixXd& pool,
                                        std::size_t n, Rng& rng) {
  std::vector<SaccadeEvent> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int type = static_cast<int>(sample_discrete(rng, params.pi)) + 1;
    auto one = sample_type_events(params, type, pool, 1, rng);
    out.push_back(std::move(one.front()));
  }
  return out;
}

}  // namespace scanpath
