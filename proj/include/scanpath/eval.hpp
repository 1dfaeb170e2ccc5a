#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <mutex>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "scanpath/corpus.hpp"
#include "scanpath/events.hpp"
#include "scanpath/fit.hpp"
#include "scanpath/gamma_glm.hpp"
#include "scanpath/stats.hpp"

namespace scanpath {

struct Dataset {
  std::vector<Text> texts;
  FrequencyTable freq;
  std::vector<Scanpath> scanpaths;

  const Text& text(const std::string& text_id) const;
};

/// Class of a scanpath: its label when present, otherwise the reader id.
std::string class_of(const Scanpath& s);

/// argmax_y of the summed event log-likelihood under models[y]; the lowest
/// index wins ties.
std::size_t generative_classify(std::span<const SaccadeEvent> events, std::span<const ModelParams> models);

class LeakageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Records every training computation of one fold together with the texts
/// and readers it touched, and throws LeakageError as soon as a held-out
/// text or reader shows up.
class LeakageAudit {
 public:
  LeakageAudit(std::set<std::string> held_out_texts, std::set<std::string> held_out_readers);

  void record(const std::string& stage, const std::set<std::string>& texts, const std::set<std::string>& readers);
  const std::vector<std::string>& log() const { return log_; }

 private:
  std::set<std::string> texts_;
  std::set<std::string> readers_;
  std::vector<std::string> log_;
  std::mutex mutex_;
};

struct SplitPlan {
  std::string fold_id;
  std::vector<std::string> train_texts;
  std::vector<std::string> test_texts;
  std::vector<std::string> train_readers;  // empty: all readers (identification)
  std::vector<std::string> test_readers;
};

/// One fold per text; the other texts train.
std::vector<SplitPlan> loto_splits(const Dataset& data);
/// The four splits obtained by crossing a seeded 50/50 reader split with a
/// 50/50 text split; training and test share neither readers nor texts.
std::vector<SplitPlan> comprehension_splits(const Dataset& data, std::uint64_t seed);

struct PipelineConfig {
  std::vector<double> lambda_grid{0.0, 1e-4, 1e-2, 1.0};
  // Applied to the kernel rescaled to unit mean training diagonal.
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  std::vector<double> ridge_grid{1e-8, 1e-6, 1e-4};  // multiples of trace(I)/D
  int inner_folds = 3;
  bool feature_selection = true;
  bool generative_baseline = false;
  double svm_tolerance = 1e-3;
  double fit_tolerance = 1e-6;
  int fit_max_iterations = 500;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct Hyperparameters {
  double lambda = 0.0;
  double ridge_factor = 1e-6;
  double C = 1.0;
  std::vector<int> columns;  // indices into the full feature layout
};

struct FoldResult {
  SplitPlan split;
  Hyperparameters chosen;
  std::vector<std::string> selected_features;
  double inner_accuracy = 0.0;
  std::size_t test_instances = 0;
  double accuracy = 0.0;                  // all lines
  std::vector<double> accuracy_by_lines;  // [k-1]: first k lines
  std::optional<double> auc;
  std::optional<double> majority_accuracy;
  std::optional<double> baseline_lambda;
  std::optional<double> baseline_accuracy;
  std::vector<double> baseline_accuracy_by_lines;
  std::vector<std::string> audit;
};

struct EvalReport {
  std::string mode;  // "identification" or "comprehension"
  std::vector<std::string> classes;
  std::vector<FoldResult> folds;
  MeanSe accuracy;
  std::vector<MeanSe> accuracy_by_lines;
  std::optional<MeanSe> auc;
  std::optional<MeanSe> majority_accuracy;
  std::optional<MeanSe> baseline_accuracy;
  std::vector<MeanSe> baseline_accuracy_by_lines;
  std::optional<WilcoxonResult> fisher_vs_baseline;
  std::string fisher_vs_baseline_note;

  nlohmann::json to_json() const;
  /// One row per fold x lines used.
  std::string to_csv() const;
};

/// Leave-one-text-out reader identification with nested tuning of lambda,
/// the metric ridge and C, and backward elimination over feature columns.
/// Test instances are (reader, text) pairs; lines are used in reading order.
EvalReport loto_cv(const Dataset& data, const PipelineConfig& config);

/// Binary comprehension prediction over reader- and text-disjoint splits.
/// The positive class is the second class in lexicographic order.
EvalReport binary_comprehension_eval(const Dataset& data, const PipelineConfig& config);

/// Runs the given splits; exposed for tests and custom protocols.
EvalReport run_splits(const Dataset& data, const std::vector<SplitPlan>& splits, const PipelineConfig& config,
                      const std::string& mode);

/// Within every text, permutes the labels of that text's readers (each
/// reader's scanpaths on the text keep one shared label).
Dataset shuffle_labels_within_texts(const Dataset& data, std::uint64_t seed);

}  // namespace scanpath
