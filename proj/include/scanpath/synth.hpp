#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "scanpath/corpus.hpp"
#include "scanpath/events.hpp"
#include "scanpath/gamma_glm.hpp"
#include "scanpath/random.hpp"

namespace scanpath {

struct SynthConfig {
  int num_readers = 62;
  int num_texts = 12;
  int lines_per_text = 10;
  int words_per_line_min = 14;
  int words_per_line_max = 18;  // 10 lines x 16 words ~ 160 words per text
  int num_features = 6;         // ground-truth M: leading columns of the corpus layout
  double reader_sigma = 0.3;
  int fixations_min = 12;
  int fixations_max = 20;
  int vocabulary = 5000;
  double zipf_exponent = 1.0;
  double total_tokens = 1e6;
  double technical_rate = 0.1;
  double sentence_rate = 1.0 / 12.0;
  bool comprehension_labels = false;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthCorpus {
  std::vector<Text> texts;
  FrequencyTable freq;
};

/// Random lowercase tokens (2-12 chars) whose table counts follow a Zipf law
/// with the configured exponent; text words are drawn with Zipf probabilities.
SynthCorpus gen_corpus(const SynthConfig& config);

/// A plausible population-level model over the first m columns of the
/// synthetic layout.
ModelParams default_base_params(int m, std::vector<std::string> layout = {});

/// Reader r: base weights plus N(0, sigma^2) offsets on every weight and
/// pi ~ Dirichlet(10 pi_0 / sigma^2); sigma = 0 reproduces the base.
std::vector<ModelParams> gen_readers(const SynthConfig& config, const ModelParams& base);

struct SynthDataset {
  SynthConfig config;
  SynthCorpus corpus;
  CorpusFeatures features;  // full layout, normalised over the whole corpus
  ModelParams base;
  std::vector<std::string> reader_ids;
  std::vector<ModelParams> readers;  // ground truth over the first num_features columns
  std::vector<Scanpath> scanpaths;   // reader-major, then text, then line
  std::vector<std::vector<SaccadeDraw>> draws;
};

/// One scanpath per reader x text x line, labelled with the reader id (or
/// with a "high"/"low" comprehension class when configured).
SynthDataset gen_dataset(const SynthConfig& config);

nlohmann::json ground_truth_json(const SynthDataset& data);

/// Model-level event draws: type from pi, launch/landing feature rows picked
/// uniformly from `pool`, amplitude and duration from the type's gammas.
/// No positional constraints are applied.
std::vector<SaccadeEvent> sample_events(const ModelParams& params, const Eigen::MatrixXd& pool,
                                        std::size_t n, Rng& rng);
/// Same with a fixed type.
std::vector<SaccadeEvent> sample_type_events(const ModelParams& params, int type,
                                             const Eigen::MatrixXd& pool, std::size_t n, Rng& rng);

}  // namespace scanpath
