#include "scanpath/eval.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "scanpath/fisher.hpp"
#include "scanpath/parallel.hpp"
#include "scanpath/random.hpp"
#include "scanpath/svm.hpp"

namespace scanpath {

using nlohmann::json;

const Text& Dataset::text(const std::string& text_id) const {
  for (const auto& t : texts) {
    if (t.text_id == text_id) return t;
  }
  throw std::out_of_range("unknown text id: " + text_id);
}

std::string class_of(const Scanpath& s) { return s.label ? *s.label : s.reader_id; }

std::size_t generative_classify(std::span<const SaccadeEvent> events, std::span<const ModelParams> models) {
  if (models.empty()) throw std::invalid_argument("generative_classify: no class models");
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < models.size(); ++y) {
    if (models[y].dimension() != models[0].dimension()) {
      throw std::invalid_argument("generative_classify: class models differ in feature dimension");
    }
    const double ll = sequence_loglik(events, models[y]);
    if (ll > best_ll) {
      best_ll = ll;
      best = y;
    }
  }
  return best;
}

LeakageAudit::LeakageAudit(std::set<std::string> held_out_texts, std::set<std::string> held_out_readers)
    : texts_(std::move(held_out_texts)), readers_(std::move(held_out_readers)) {}

void LeakageAudit::record(const std::string& stage, const std::set<std::string>& texts,
                          const std::set<std::string>& readers) {
  std::lock_guard lock(mutex_);
  for (const auto& t : texts) {
    if (texts_.count(t)) throw LeakageError("leakage: held-out text " + t + " used in " + stage);
  }
  for (const auto& r : readers) {
    if (readers_.count(r)) throw LeakageError("leakage: held-out reader " + r + " used in " + stage);
  }
  log_.push_back(stage + ": " + std::to_string(texts.size()) + " texts, " + std::to_string(readers.size()) +
                 " readers");
}

std::vector<SplitPlan> loto_splits(const Dataset& data) {
  if (data.texts.size() < 2) throw std::invalid_argument("leave-one-text-out needs at least 2 texts");
  std::vector<std::string> ids;
  for (const auto& t : data.texts) ids.push_back(t.text_id);
  std::sort(ids.begin(), ids.end());
  std::vector<SplitPlan> out;
  for (const auto& held : ids) {
    SplitPlan p;
    p.fold_id = "text:" + held;
    p.test_texts = {held};
    for (const auto& t : ids) {
      if (t != held) p.train_texts.push_back(t);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<SplitPlan> comprehension_splits(const Dataset& data, std::uint64_t seed) {
  std::set<std::string> reader_set;
  for (const auto& s : data.scanpaths) reader_set.insert(s.reader_id);
  std::vector<std::string> readers(reader_set.begin(), reader_set.end());
  std::vector<std::string> texts;
  for (const auto& t : data.texts) texts.push_back(t.text_id);
  std::sort(texts.begin(), texts.end());
  if (readers.size() < 2 || texts.size() < 2) {
    throw std::invalid_argument("comprehension splits need at least 2 readers and 2 texts");
  }
  Rng rng(derive_seed(seed, 17));
  auto shuffle = [&](std::vector<std::string>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1))]);
    }
  };
  shuffle(readers);
  shuffle(texts);
  auto halves = [](const std::vector<std::string>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::array<std::vector<std::string>, 2> h{std::vector<std::string>(v.begin(), mid),
                                              std::vector<std::string>(mid, v.end())};
    std::sort(h[0].begin(), h[0].end());
    std::sort(h[1].begin(), h[1].end());
    return h;
  };
  const auto rh = halves(readers);
  const auto th = halves(texts);
  std::vector<SplitPlan> out;
  for (int r = 0; r < 2; ++r) {
    for (int t = 0; t < 2; ++t) {
      SplitPlan p;
      p.fold_id = "readers" + std::to_string(r) + "-texts" + std::to_string(t);
      p.train_readers = rh[static_cast<std::size_t>(r)];
      p.train_texts = th[static_cast<std::size_t>(t)];
      p.test_readers = rh[static_cast<std::size_t>(1 - r)];
      p.test_texts = th[static_cast<std::size_t>(1 - t)];
      out.push_back(std::move(p));
    }
  }
  return out;
}

void PipelineConfig::validate() const {
  if (lambda_grid.empty() || c_grid.empty() || ridge_grid.empty()) {
    throw std::invalid_argument("pipeline: hyperparameter grids must be non-empty");
  }
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw std::invalid_argument("pipeline: lambda must be >= 0");
  }
  for (double c : c_grid) {
    if (!(c > 0.0)) throw std::invalid_argument("pipeline: C must be > 0");
  }
  for (double r : ridge_grid) {
    if (!(r > 0.0)) throw std::invalid_argument("pipeline: ridge factors must be > 0");
  }
  if (inner_folds < 2) throw std::invalid_argument("pipeline: inner_folds must be >= 2");
  if (!(svm_tolerance > 0.0)) throw std::invalid_argument("pipeline: svm tolerance must be > 0");
}

json to_json(const PipelineConfig& c) {
  return {{"lambda_grid", c.lambda_grid},
          {"c_grid", c.c_grid},
          {"ridge_grid", c.ridge_grid},
          {"inner_folds", c.inner_folds},
          {"feature_selection", c.feature_selection},
          {"generative_baseline", c.generative_baseline},
          {"svm_tolerance", c.svm_tolerance},
          {"fit_tolerance", c.fit_tolerance},
          {"fit_max_iterations", c.fit_max_iterations},
          {"seed", c.seed}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  read("lambda_grid", c.lambda_grid);
  read("c_grid", c.c_grid);
  read("ridge_grid", c.ridge_grid);
  read("inner_folds", c.inner_folds);
  read("feature_selection", c.feature_selection);
  read("generative_baseline", c.generative_baseline);
  read("svm_tolerance", c.svm_tolerance);
  read("fit_tolerance", c.fit_tolerance);
  read("fit_max_iterations", c.fit_max_iterations);
  read("seed", c.seed);
  c.validate();
  return c;
}

namespace {

using Indices = std::vector<std::size_t>;
using EventSets = std::vector<std::vector<SaccadeEvent>>;

std::set<std::string> texts_of(const Dataset& data, const Indices& idx) {
  std::set<std::string> out;
  for (auto i : idx) out.insert(data.scanpaths[i].text_id);
  return out;
}

std::set<std::string> readers_of(const Dataset& data, const Indices& idx) {
  std::set<std::string> out;
  for (auto i : idx) out.insert(data.scanpaths[i].reader_id);
  return out;
}

Indices select_scanpaths(const Dataset& data, const std::vector<std::string>& texts,
                         const std::vector<std::string>& readers) {
  const std::set<std::string> ts(texts.begin(), texts.end());
  const std::set<std::string> rs(readers.begin(), readers.end());
  Indices out;
  for (std::size_t i = 0; i < data.scanpaths.size(); ++i) {
    const auto& s = data.scanpaths[i];
    if (ts.count(s.text_id) && (rs.empty() || rs.count(s.reader_id))) out.push_back(i);
  }
  return out;
}

// Features for every text, z-scored with statistics of `stat_texts` only.
// Inner folds pass the outer flag vocabulary so that column indices mean
// the same thing at every level of the nested CV.
CorpusFeatures normalized_features(const Dataset& data, const std::set<std::string>& stat_texts,
                                   LeakageAudit& audit, const std::string& stage,
                                   const std::vector<std::string>* flags = nullptr) {
  audit.record(stage + "/normalization", stat_texts, {});
  std::vector<Text> subset;
  for (const auto& t : data.texts) {
    if (stat_texts.count(t.text_id)) subset.push_back(t);
  }
  NormStats stats = compute_features(subset, data.freq).stats;
  if (flags) stats.flags = *flags;
  return compute_features(data.texts, data.freq, stats);
}

EventSets events_for(const Dataset& data, const CorpusFeatures& features, const Indices& idx) {
  EventSets out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = data.scanpaths[idx[k]];
    out[k] = extract_events(s, data.text(s.text_id), features.at(s.text_id));
  }
  return out;
}

std::vector<SaccadeEvent> concat(const EventSets& sets) {
  std::vector<SaccadeEvent> out;
  for (const auto& s : sets) out.insert(out.end(), s.begin(), s.end());
  return out;
}

FitConfig fit_config(const PipelineConfig& config, double lambda) {
  FitConfig f;
  f.lambda = lambda;
  f.tolerance = config.fit_tolerance;
  f.max_iterations = config.fit_max_iterations;
  return f;
}

std::size_t argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::size_t best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row[c] > row[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(c);
  }
  return best;
}

// Decision values (lines x classes) on `test` for every (ridge, C) pair; an
// empty matrix marks a grid point whose metric or SVM could not be built.
struct GridDecisions {
  std::vector<std::string> classes;
  std::vector<std::vector<Eigen::MatrixXd>> decisions;  // [ridge][C]
};

GridDecisions fisher_grid(const Dataset& data, const CorpusFeatures& full, const Indices& train,
                          const Indices& test, const std::vector<int>& columns, double lambda,
                          const std::vector<double>& ridges, const std::vector<double>& cs,
                          const PipelineConfig& config, LeakageAudit& audit, const std::string& stage) {
  const CorpusFeatures sel = select_columns(full, columns);
  const int m = static_cast<int>(columns.size());
  const EventSets train_events = events_for(data, sel, train);
  const EventSets test_events = events_for(data, sel, test);
  const std::set<std::string> tt = texts_of(data, train);
  const std::set<std::string> tr = readers_of(data, train);

  audit.record(stage + "/fit", tt, tr);
  const ModelParams theta = fit_model(concat(train_events), m, fit_config(config, lambda), sel.layout).params;
  const Eigen::MatrixXd train_scores = fisher_scores(train_events, theta);
  const Eigen::MatrixXd test_scores = fisher_scores(test_events, theta);

  std::vector<std::string> labels;
  for (auto i : train) labels.push_back(class_of(data.scanpaths[i]));
  GridDecisions out;
  out.classes = labels;
  std::sort(out.classes.begin(), out.classes.end());
  out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
  out.decisions.assign(ridges.size(), std::vector<Eigen::MatrixXd>(cs.size()));
  if (out.classes.size() < 2) return out;

  for (std::size_t r = 0; r < ridges.size(); ++r) {
    audit.record(stage + "/metric", tt, tr);
    Eigen::MatrixXd train_z;
    Eigen::MatrixXd test_z;
    try {
      const FisherMetric metric(train_scores, FisherMetric::relative_ridge(train_scores, ridges[r]));
      train_z = metric.whiten_rows(train_scores);
      test_z = metric.whiten_rows(test_scores);
    } catch (const std::runtime_error&) {
      continue;
    }
    // Rescale to unit mean training diagonal so the C grid is on a fixed scale;
    // the raw diagonal grows with the score dimension and makes SMO crawl at large C.
    Eigen::MatrixXd gram = gram_from_whitened(train_z, train_z);
    Eigen::MatrixXd k_test = gram_from_whitened(test_z, train_z);
    const double scale = gram.diagonal().mean();
    if (scale > 0.0) {
      gram /= scale;
      k_test /= scale;
    }
    for (std::size_t c = 0; c < cs.size(); ++c) {
      audit.record(stage + "/svm", tt, tr);
      try {
        const MulticlassModel model = train_multiclass(gram, labels, cs[c], config.svm_tolerance);
        out.decisions[r][c] = model.decision_values(k_test);
      } catch (const std::runtime_error&) {
      }
    }
  }
  return out;
}

// Per-class generative models over the full layout.
std::vector<ModelParams> fit_class_models(const Dataset& data, const CorpusFeatures& features,
                                          const Indices& train, const std::vector<std::string>& classes,
                                          double lambda, const PipelineConfig& config, LeakageAudit& audit,
                                          const std::string& stage) {
  const int m = static_cast<int>(features.layout.size());
  std::vector<ModelParams> out;
  for (const auto& cls : classes) {
    Indices mine;
    for (auto i : train) {
      if (class_of(data.scanpaths[i]) == cls) mine.push_back(i);
    }
    audit.record(stage + "/class-fit", texts_of(data, mine), readers_of(data, mine));
    const auto events = concat(events_for(data, features, mine));
    if (events.empty()) throw std::runtime_error("no training events for class " + cls);
    out.push_back(fit_model(events, m, fit_config(config, lambda), features.layout).params);
  }
  return out;
}

std::vector<std::string> classes_of(const Dataset& data, const Indices& idx) {
  std::set<std::string> s;
  for (auto i : idx) s.insert(class_of(data.scanpaths[i]));
  return {s.begin(), s.end()};
}

struct InnerFold {
  Indices train;
  Indices val;
  CorpusFeatures features;
};

struct Counts {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : -1.0; }
};

void count_lines(const Dataset& data, const Indices& val, const std::vector<std::string>& classes,
                 const Eigen::MatrixXd& decisions, Counts& counts) {
  counts.total += val.size();
  if (decisions.size() == 0) return;
  for (std::size_t k = 0; k < val.size(); ++k) {
    const std::size_t pred = argmax_row(decisions.row(static_cast<Eigen::Index>(k)));
    if (classes[pred] == class_of(data.scanpaths[val[k]])) ++counts.correct;
  }
}

std::vector<InnerFold> make_inner_folds(const Dataset& data, const SplitPlan& split, const PipelineConfig& config,
                                        const std::vector<std::string>& flags, LeakageAudit& audit) {
  std::vector<std::string> texts = split.train_texts;
  std::sort(texts.begin(), texts.end());
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.inner_folds), texts.size());
  std::vector<InnerFold> out;
  if (k < 2) return out;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::string> tr;
    std::vector<std::string> va;
    for (std::size_t i = 0; i < texts.size(); ++i) (i % k == f ? va : tr).push_back(texts[i]);
    InnerFold fold;
    fold.train = select_scanpaths(data, tr, split.train_readers);
    fold.val = select_scanpaths(data, va, split.train_readers);
    if (fold.train.empty() || fold.val.empty()) continue;
    fold.features = normalized_features(data, {tr.begin(), tr.end()}, audit, "inner" + std::to_string(f), &flags);
    out.push_back(std::move(fold));
  }
  return out;
}

struct Tuned {
  Hyperparameters hyper;
  double inner_accuracy = -1.0;
};

// Inner accuracy for every (ridge, C) with lambda and columns fixed.
std::vector<std::vector<Counts>> inner_grid(const Dataset& data, const std::vector<InnerFold>& folds,
                                            const std::vector<int>& columns, double lambda,
                                            const PipelineConfig& config, LeakageAudit& audit) {
  std::vector<std::vector<Counts>> counts(config.ridge_grid.size(), std::vector<Counts>(config.c_grid.size()));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const GridDecisions g = fisher_grid(data, fold.features, fold.train, fold.val, columns, lambda, config.ridge_grid,
                                        config.c_grid, config, audit, "inner" + std::to_string(f));
    for (std::size_t r = 0; r < config.ridge_grid.size(); ++r) {
      for (std::size_t c = 0; c < config.c_grid.size(); ++c) {
        count_lines(data, fold.val, g.classes, g.decisions[r][c], counts[r][c]);
      }
    }
  }
  return counts;
}

// Best (ridge, C) in grid order; strict improvements only.
std::pair<double, std::pair<std::size_t, std::size_t>> best_point(const std::vector<std::vector<Counts>>& counts) {
  double best = -2.0;
  std::pair<std::size_t, std::size_t> at{0, 0};
  for (std::size_t r = 0; r < counts.size(); ++r) {
    for (std::size_t c = 0; c < counts[r].size(); ++c) {
      if (counts[r][c].accuracy() > best) {
        best = counts[r][c].accuracy();
        at = {r, c};
      }
    }
  }
  return {best, at};
}

Tuned tune_fisher(const Dataset& data, const std::vector<InnerFold>& folds, int num_columns,
                  const PipelineConfig& config, LeakageAudit& audit) {
  Tuned t;
  t.hyper.columns.resize(static_cast<std::size_t>(num_columns));
  std::iota(t.hyper.columns.begin(), t.hyper.columns.end(), 0);
  t.hyper.lambda = config.lambda_grid.front();
  t.hyper.ridge_factor = config.ridge_grid.front();
  t.hyper.C = config.c_grid.front();
  if (folds.empty()) return t;

  for (double lambda : config.lambda_grid) {
    const auto [acc, at] = best_point(inner_grid(data, folds, t.hyper.columns, lambda, config, audit));
    if (acc > t.inner_accuracy) {
      t.inner_accuracy = acc;
      t.hyper.lambda = lambda;
      t.hyper.ridge_factor = config.ridge_grid[at.first];
      t.hyper.C = config.c_grid[at.second];
    }
  }
  if (!config.feature_selection) return t;

  // Greedy backward elimination; the bias column stays.
  while (t.hyper.columns.size() > 1) {
    double best = -2.0;
    std::vector<int> best_columns;
    std::pair<std::size_t, std::size_t> best_at{0, 0};
    for (std::size_t drop = 1; drop < t.hyper.columns.size(); ++drop) {
      std::vector<int> candidate = t.hyper.columns;
      candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(drop));
      const auto [acc, at] = best_point(inner_grid(data, folds, candidate, t.hyper.lambda, config, audit));
      if (acc > best) {
        best = acc;
        best_columns = std::move(candidate);
        best_at = at;
      }
    }
    if (!(best > t.inner_accuracy)) break;
    t.inner_accuracy = best;
    t.hyper.columns = std::move(best_columns);
    t.hyper.ridge_factor = config.ridge_grid[best_at.first];
    t.hyper.C = config.c_grid[best_at.second];
  }
  return t;
}

double tune_generative(const Dataset& data, const std::vector<InnerFold>& folds, const PipelineConfig& config,
                       LeakageAudit& audit) {
  double best_lambda = config.lambda_grid.front();
  double best = -2.0;
  for (double lambda : config.lambda_grid) {
    Counts counts;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& fold = folds[f];
      const auto classes = classes_of(data, fold.train);
      const auto models = fit_class_models(data, fold.features, fold.train, classes, lambda, config, audit,
                                           "inner" + std::to_string(f));
      const EventSets val = events_for(data, fold.features, fold.val);
      counts.total += val.size();
      for (std::size_t k = 0; k < val.size(); ++k) {
        if (classes[generative_classify(val[k], models)] == class_of(data.scanpaths[fold.val[k]])) ++counts.correct;
      }
    }
    if (counts.accuracy() > best) {
      best = counts.accuracy();
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

// Test units: the lines one reader produced on one text, in line order.
struct TestUnit {
  std::string label;
  std::vector<std::size_t> rows;  // positions within the test index list
};

std::vector<TestUnit> test_units(const Dataset& data, const Indices& test) {
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, std::size_t>>> groups;
  for (std::size_t k = 0; k < test.size(); ++k) {
    const auto& s = data.scanpaths[test[k]];
    groups[{s.reader_id, s.text_id}].push_back({s.line_id, k});
  }
  std::vector<TestUnit> out;
  for (auto& [key, lines] : groups) {
    std::sort(lines.begin(), lines.end());
    TestUnit u;
    u.label = class_of(data.scanpaths[test[lines.front().second]]);
    for (const auto& [line, k] : lines) {
      if (class_of(data.scanpaths[test[k]]) != u.label) {
        throw std::invalid_argument("reader " + key.first + " has inconsistent labels on text " + key.second);
      }
      u.rows.push_back(k);
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::size_t max_lines(const std::vector<TestUnit>& units) {
  std::size_t n = 0;
  for (const auto& u : units) n = std::max(n, u.rows.size());
  return n;
}

FoldResult run_fold(const Dataset& data, const SplitPlan& split, const PipelineConfig& config, bool binary) {
  const std::set<std::string> test_texts(split.test_texts.begin(), split.test_texts.end());
  const std::set<std::string> test_readers(split.test_readers.begin(), split.test_readers.end());
  LeakageAudit audit(test_texts, test_readers);
  FoldResult result;
  result.split = split;

  const Indices train = select_scanpaths(data, split.train_texts, split.train_readers);
  const Indices test = select_scanpaths(data, split.test_texts, split.test_readers);
  if (train.empty() || test.empty()) throw std::invalid_argument("split " + split.fold_id + " is empty");
  const auto train_classes = classes_of(data, train);
  const auto test_classes = classes_of(data, test);
  if (binary) {
    if (train_classes.size() != 2) {
      throw std::invalid_argument("split " + split.fold_id + ": training data must contain exactly two classes");
    }
    if (test_classes.size() != 2) {
      throw std::invalid_argument("split " + split.fold_id + ": test data must contain both classes");
    }
  } else {
    if (train_classes.size() < 2) throw std::invalid_argument("split " + split.fold_id + ": fewer than two classes");
  }
  for (const auto& c : test_classes) {
    if (!std::binary_search(train_classes.begin(), train_classes.end(), c)) {
      throw std::invalid_argument("class " + c + " is absent from the training data of fold " + split.fold_id);
    }
  }

  const CorpusFeatures outer_features =
      normalized_features(data, {split.train_texts.begin(), split.train_texts.end()}, audit, "outer");
  const std::vector<InnerFold> inner = make_inner_folds(data, split, config, outer_features.stats.flags, audit);
  const int num_columns = static_cast<int>(outer_features.layout.size());
  const Tuned tuned = tune_fisher(data, inner, num_columns, config, audit);
  result.chosen = tuned.hyper;
  result.inner_accuracy = tuned.inner_accuracy;
  for (int c : tuned.hyper.columns) result.selected_features.push_back(outer_features.layout[static_cast<std::size_t>(c)]);

  const GridDecisions g = fisher_grid(data, outer_features, train, test, tuned.hyper.columns, tuned.hyper.lambda,
                                      {tuned.hyper.ridge_factor}, {tuned.hyper.C}, config, audit, "outer");
  const Eigen::MatrixXd& decisions = g.decisions[0][0];
  if (decisions.size() == 0) throw std::runtime_error("fold " + split.fold_id + ": final classifier failed");

  const auto units = test_units(data, test);
  result.test_instances = units.size();
  const std::size_t lines = max_lines(units);
  result.accuracy_by_lines.assign(lines, 0.0);
  std::vector<double> positive_scores;
  std::vector<int> positive_labels;
  for (const auto& u : units) {
    for (std::size_t k = 1; k <= lines; ++k) {
      const std::size_t used = std::min(k, u.rows.size());
      Eigen::MatrixXd block(static_cast<Eigen::Index>(used), decisions.cols());
      for (std::size_t j = 0; j < used; ++j) block.row(static_cast<Eigen::Index>(j)) = decisions.row(static_cast<Eigen::Index>(u.rows[j]));
      const TextPrediction p = predict_from_decisions(block);
      if (g.classes[p.predicted] == u.label) result.accuracy_by_lines[k - 1] += 1.0;
      if (binary && k == lines) {
        positive_scores.push_back(p.mean_scores[1]);
        positive_labels.push_back(u.label == g.classes[1] ? 1 : 0);
      }
    }
  }
  for (auto& a : result.accuracy_by_lines) a /= static_cast<double>(units.size());
  result.accuracy = result.accuracy_by_lines.back();

  if (binary) {
    result.auc = auc(positive_scores, positive_labels);
    std::map<std::pair<std::string, std::string>, std::string> train_units;
    for (auto i : train) train_units[{data.scanpaths[i].reader_id, data.scanpaths[i].text_id}] = class_of(data.scanpaths[i]);
    std::size_t second = 0;
    for (const auto& [key, label] : train_units) second += label == g.classes[1] ? 1 : 0;
    const std::string majority = 2 * second > train_units.size() ? g.classes[1] : g.classes[0];
    double hits = 0.0;
    for (const auto& u : units) hits += u.label == majority ? 1.0 : 0.0;
    result.majority_accuracy = hits / static_cast<double>(units.size());
  }

  if (config.generative_baseline) {
    const double lambda = inner.empty() ? config.lambda_grid.front() : tune_generative(data, inner, config, audit);
    result.baseline_lambda = lambda;
    const auto models = fit_class_models(data, outer_features, train, train_classes, lambda, config, audit, "outer");
    const EventSets test_events = events_for(data, outer_features, test);
    result.baseline_accuracy_by_lines.assign(lines, 0.0);
    for (const auto& u : units) {
      std::vector<SaccadeEvent> events;
      for (std::size_t k = 1; k <= lines; ++k) {
        if (k <= u.rows.size()) {
          const auto& e = test_events[u.rows[k - 1]];
          events.insert(events.end(), e.begin(), e.end());
        }
        if (train_classes[generative_classify(events, models)] == u.label) {
          result.baseline_accuracy_by_lines[k - 1] += 1.0;
        }
      }
    }
    for (auto& a : result.baseline_accuracy_by_lines) a /= static_cast<double>(units.size());
    result.baseline_accuracy = result.baseline_accuracy_by_lines.back();
  }
  result.audit = audit.log();
  return result;
}

json mean_se_json(const MeanSe& m) { return {{"mean", m.mean}, {"standard_error", m.standard_error}}; }

std::vector<MeanSe> curve_summary(const std::vector<FoldResult>& folds, bool baseline) {
  std::size_t lines = 0;
  for (const auto& f : folds) lines = std::max(lines, (baseline ? f.baseline_accuracy_by_lines : f.accuracy_by_lines).size());
  std::vector<MeanSe> out;
  for (std::size_t k = 0; k < lines; ++k) {
    std::vector<double> v;
    for (const auto& f : folds) {
      const auto& curve = baseline ? f.baseline_accuracy_by_lines : f.accuracy_by_lines;
      if (!curve.empty()) v.push_back(curve[std::min(k, curve.size() - 1)]);
    }
    out.push_back(mean_and_standard_error(v));
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

EvalReport run_splits(const Dataset& data, const std::vector<SplitPlan>& splits, const PipelineConfig& config,
                      const std::string& mode) {
  config.validate();
  const bool binary = mode == "comprehension";
  EvalReport report;
  report.mode = mode;
  {
    Indices all(data.scanpaths.size());
    std::iota(all.begin(), all.end(), 0);
    report.classes = classes_of(data, all);
  }
  report.folds.resize(splits.size());
  parallel_for(splits.size(), [&](std::size_t i) { report.folds[i] = run_fold(data, splits[i], config, binary); });

  std::vector<double> acc;
  std::vector<double> aucs;
  std::vector<double> majority;
  std::vector<double> base;
  for (const auto& f : report.folds) {
    acc.push_back(f.accuracy);
    if (f.auc) aucs.push_back(*f.auc);
    if (f.majority_accuracy) majority.push_back(*f.majority_accuracy);
    if (f.baseline_accuracy) base.push_back(*f.baseline_accuracy);
  }
  report.accuracy = mean_and_standard_error(acc);
  report.accuracy_by_lines = curve_summary(report.folds, false);
  if (!aucs.empty()) report.auc = mean_and_standard_error(aucs);
  if (!majority.empty()) report.majority_accuracy = mean_and_standard_error(majority);
  if (!base.empty()) {
    report.baseline_accuracy = mean_and_standard_error(base);
    report.baseline_accuracy_by_lines = curve_summary(report.folds, true);
    try {
      report.fisher_vs_baseline = wilcoxon_signed_rank(acc, base);
    } catch (const std::invalid_argument& e) {
      report.fisher_vs_baseline_note = e.what();
    }
  }
  return report;
}

EvalReport loto_cv(const Dataset& data, const PipelineConfig& config) {
  return run_splits(data, loto_splits(data), config, "identification");
}

EvalReport binary_comprehension_eval(const Dataset& data, const PipelineConfig& config) {
  Indices all(data.scanpaths.size());
  std::iota(all.begin(), all.end(), 0);
  if (classes_of(data, all).size() != 2) throw std::invalid_argument("comprehension evaluation needs binary labels");
  return run_splits(data, comprehension_splits(data, config.seed), config, "comprehension");
}

Dataset shuffle_labels_within_texts(const Dataset& data, std::uint64_t seed) {
  Dataset out = data;
  std::map<std::string, std::map<std::string, std::string>> labels;  // text -> reader -> class
  for (const auto& s : data.scanpaths) {
    auto [it, inserted] = labels[s.text_id].emplace(s.reader_id, class_of(s));
    if (!inserted && it->second != class_of(s)) {
      throw std::invalid_argument("reader " + s.reader_id + " has inconsistent labels on text " + s.text_id);
    }
  }
  std::uint64_t stream = 0;
  std::map<std::string, std::map<std::string, std::string>> permuted;
  for (const auto& [text, readers] : labels) {
    std::vector<std::string> pool;
    for (const auto& [reader, label] : readers) pool.push_back(label);
    Rng rng(derive_seed(seed, stream++));
    for (std::size_t i = pool.size(); i > 1; --i) {
      std::swap(pool[i - 1], pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1))]);
    }
    std::size_t k = 0;
    for (const auto& [reader, label] : readers) permuted[text][reader] = pool[k++];
  }
  for (auto& s : out.scanpaths) s.label = permuted[s.text_id][s.reader_id];
  return out;
}

json EvalReport::to_json() const {
  json folds_json = json::array();
  for (const auto& f : folds) {
    json j = {{"fold_id", f.split.fold_id},
              {"train_texts", f.split.train_texts},
              {"test_texts", f.split.test_texts},
              {"train_readers", f.split.train_readers},
              {"test_readers", f.split.test_readers},
              {"lambda", f.chosen.lambda},
              {"ridge_factor", f.chosen.ridge_factor},
              {"C", f.chosen.C},
              {"selected_features", f.selected_features},
              {"inner_accuracy", f.inner_accuracy},
              {"test_instances", f.test_instances},
              {"accuracy", f.accuracy},
              {"accuracy_by_lines", f.accuracy_by_lines},
              {"leakage_audit", f.audit}};
    if (f.auc) j["auc"] = *f.auc;
    if (f.majority_accuracy) j["majority_accuracy"] = *f.majority_accuracy;
    if (f.baseline_accuracy) {
      j["baseline_lambda"] = *f.baseline_lambda;
      j["baseline_accuracy"] = *f.baseline_accuracy;
      j["baseline_accuracy_by_lines"] = f.baseline_accuracy_by_lines;
    }
    folds_json.push_back(std::move(j));
  }
  json curve = json::array();
  for (std::size_t k = 0; k < accuracy_by_lines.size(); ++k) {
    json row = {{"lines", k + 1}, {"accuracy", mean_se_json(accuracy_by_lines[k])}};
    if (k < baseline_accuracy_by_lines.size()) row["baseline_accuracy"] = mean_se_json(baseline_accuracy_by_lines[k]);
    curve.push_back(std::move(row));
  }
  json out = {{"mode", mode},
              {"classes", classes},
              {"num_folds", folds.size()},
              {"accuracy", mean_se_json(accuracy)},
              {"accuracy_by_lines", std::move(curve)},
              {"folds", std::move(folds_json)}};
  if (auc) out["auc"] = mean_se_json(*auc);
  if (majority_accuracy) out["majority_accuracy"] = mean_se_json(*majority_accuracy);
  if (baseline_accuracy) {
    out["baseline_accuracy"] = mean_se_json(*baseline_accuracy);
    if (fisher_vs_baseline) {
      out["fisher_vs_baseline"] = {{"statistic", fisher_vs_baseline->statistic},
                                   {"n", fisher_vs_baseline->n},
                                   {"p_value", fisher_vs_baseline->p_value},
                                   {"exact", fisher_vs_baseline->exact}};
    } else {
      out["fisher_vs_baseline"] = {{"error", fisher_vs_baseline_note}};
    }
  }
  return out;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "fold,test_texts,lines_used,accuracy,baseline_accuracy\n";
  for (const auto& f : folds) {
    std::string texts;
    for (const auto& t : f.split.test_texts) texts += (texts.empty() ? "" : ";") + t;
    for (std::size_t k = 0; k < f.accuracy_by_lines.size(); ++k) {
      os << f.split.fold_id << ',' << texts << ',' << k + 1 << ',' << format_double(f.accuracy_by_lines[k]) << ',';
      if (k < f.baseline_accuracy_by_lines.size()) os << format_double(f.baseline_accuracy_by_lines[k]);
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace scanpath
