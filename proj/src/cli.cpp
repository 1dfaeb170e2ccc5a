#include "scanpath/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "scanpath/corpus.hpp"
#include "scanpath/eval.hpp"
#include "scanpath/events.hpp"
#include "scanpath/fisher.hpp"
#include "scanpath/fit.hpp"
#include "scanpath/gamma_glm.hpp"
#include "scanpath/hashing.hpp"
#include "scanpath/parallel.hpp"
#include "scanpath/svm.hpp"
#include "scanpath/synth.hpp"

namespace scanpath {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FitFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json provenance(const std::string& command, json config, json seed,
                const std::vector<fs::path>& inputs) {
  json hashes = json::object();
  for (const auto& p : inputs) hashes[p.filename().string()] = sha256_file(p);
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"command", command},
          {"config", std::move(config)},
          {"seed", seed},
          {"inputs", std::move(hashes)}};
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(1) + "\n"); }

// Non-JSON artifacts get a sidecar carrying provenance and their own hash.
void write_with_meta(const fs::path& path, const std::string& contents, json prov) {
  write_file(path, contents);
  prov["artifact"] = {{"file", path.filename().string()}, {"sha256", sha256_hex(contents)}};
  write_json(fs::path(path.string() + ".meta.json"), {{"provenance", std::move(prov)}});
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError("bad grid value '" + item + "'");
    }
  }
  if (out.empty()) throw ParseError("empty grid");
  return out;
}

struct DataPaths {
  std::string texts;
  std::string scanpaths;
  std::string freq;

  void add(CLI::App* cmd) {
    cmd->add_option("--texts", texts, "Text JSON (object or array)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--scanpaths", scanpaths, "Scanpath JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--freq", freq, "Frequency table TSV")->required()->check(CLI::ExistingFile);
  }
  Dataset load() const { return {load_texts(texts), FrequencyTable::load(freq), load_scanpaths(scanpaths)}; }
  std::vector<fs::path> paths() const { return {texts, scanpaths, freq}; }
};

std::vector<std::vector<SaccadeEvent>> extract_all(const Dataset& data, const CorpusFeatures& features) {
  std::vector<std::vector<SaccadeEvent>> out;
  for (const auto& s : data.scanpaths) {
    out.push_back(extract_events(s, data.text(s.text_id), features.at(s.text_id)));
  }
  return out;
}

void print_report(const json& r, std::ostream& os) {
  auto ms = [](const json& m) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << m.at("mean").get<double>() << " +- " << m.at("standard_error").get<double>();
    return s.str();
  };
  os << "mode: " << r.at("mode").get<std::string>() << ", folds: " << r.at("num_folds").get<int>() << "\n";
  os << "accuracy: " << ms(r.at("accuracy")) << "\n";
  if (r.contains("auc")) os << "auc: " << ms(r.at("auc")) << "\n";
  if (r.contains("majority_accuracy")) os << "majority baseline: " << ms(r.at("majority_accuracy")) << "\n";
  if (r.contains("baseline_accuracy")) {
    os << "generative baseline: " << ms(r.at("baseline_accuracy")) << "\n";
    const auto& w = r.at("fisher_vs_baseline");
    if (w.contains("p_value")) {
      os << "wilcoxon p (fisher vs baseline): " << w.at("p_value").get<double>() << "\n";
    } else {
      os << "wilcoxon: " << w.at("error").get<std::string>() << "\n";
    }
  }
  os << "lines  accuracy";
  if (r.contains("baseline_accuracy")) os << "          baseline";
  os << "\n";
  for (const auto& row : r.at("accuracy_by_lines")) {
    os << row.at("lines").get<int>() << "      " << ms(row.at("accuracy"));
    if (row.contains("baseline_accuracy")) os << "  " << ms(row.at("baseline_accuracy"));
    os << "\n";
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Fisher-kernel reader identification from eye-movement scanpaths"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (SCANPATH_THREADS takes precedence)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus, dataset and ground truth");
  SynthConfig sc;
  std::string synth_config;
  std::string synth_out;
  synth->add_option("--config", synth_config, "SynthConfig JSON; flags below override it")->check(CLI::ExistingFile);
  synth->add_option("--readers", sc.num_readers);
  synth->add_option("--texts", sc.num_texts);
  synth->add_option("--lines", sc.lines_per_text);
  synth->add_option("--words-min", sc.words_per_line_min);
  synth->add_option("--words-max", sc.words_per_line_max);
  synth->add_option("--features", sc.num_features, "Ground-truth M");
  synth->add_option("--sigma", sc.reader_sigma, "Std of per-reader weight offsets");
  synth->add_option("--fixations-min", sc.fixations_min);
  synth->add_option("--fixations-max", sc.fixations_max);
  synth->add_option("--vocabulary", sc.vocabulary);
  synth->add_option("--zipf", sc.zipf_exponent);
  synth->add_flag("--comprehension", sc.comprehension_labels, "Label scanpaths high/low instead of by reader");
  synth->add_option("--seed", sc.seed);
  synth->add_option("--out", synth_out, "Output directory")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the gamma scanpath model by regularised maximum likelihood");
  DataPaths fit_data;
  fit_data.add(fit);
  FitConfig fc;
  std::string fit_out;
  std::string fit_log;
  fit->add_option("--lambda", fc.lambda);
  fit->add_option("--tolerance", fc.tolerance);
  fit->add_option("--max-iter", fc.max_iterations);
  fit->add_option("--out", fit_out, "Model JSON")->required();
  fit->add_option("--log", fit_log, "Fit log JSON (default: <out>.log.json)");

  // score
  auto* score = app.add_subcommand("score", "Emit Fisher scores, one row per scanpath");
  DataPaths score_data;
  score_data.add(score);
  std::string score_model;
  std::string score_out;
  score->add_option("--model", score_model)->required()->check(CLI::ExistingFile);
  score->add_option("--out", score_out)->required();

  // kernel
  auto* kernel = app.add_subcommand("kernel", "Emit a Fisher-kernel Gram matrix");
  std::string kernel_train;
  std::string kernel_test;
  std::string kernel_out;
  double ridge_factor = 1e-6;
  kernel->add_option("--scores", kernel_train, "Training scores (define the metric)")->required()->check(CLI::ExistingFile);
  kernel->add_option("--test-scores", kernel_test, "Rows of the emitted block (default: training scores)")
      ->check(CLI::ExistingFile);
  kernel->add_option("--ridge-factor", ridge_factor, "Ridge as a multiple of trace(I)/D");
  kernel->add_option("--out", kernel_out)->required();

  // train-svm
  auto* train_svm = app.add_subcommand("train-svm", "Train one-vs-rest SVMs on a precomputed Gram matrix");
  std::string svm_gram;
  std::string svm_labels;
  std::string svm_out;
  double svm_c = 1.0;
  double svm_tol = 1e-3;
  train_svm->add_option("--gram", svm_gram)->required()->check(CLI::ExistingFile);
  train_svm->add_option("--scanpaths", svm_labels, "Scanpath JSONL supplying labels in row order")
      ->required()
      ->check(CLI::ExistingFile);
  train_svm->add_option("--C", svm_c);
  train_svm->add_option("--tol", svm_tol);
  train_svm->add_option("--out", svm_out)->required();

  // identify / comprehend
  PipelineConfig pc;
  std::string pipeline_config;
  std::string lambda_grid;
  std::string c_grid;
  std::string ridge_grid;
  std::string baseline;
  bool no_selection = false;
  std::string eval_out;
  DataPaths eval_data;
  auto add_eval_options = [&](CLI::App* cmd) {
    eval_data.add(cmd);
    cmd->add_option("--config", pipeline_config, "Pipeline JSON; flags below override it")->check(CLI::ExistingFile);
    cmd->add_option("--lambda-grid", lambda_grid, "Comma-separated");
    cmd->add_option("--c-grid", c_grid, "Comma-separated");
    cmd->add_option("--ridge-grid", ridge_grid, "Comma-separated multiples of trace(I)/D");
    cmd->add_option("--inner-folds", pc.inner_folds);
    cmd->add_flag("--no-feature-selection", no_selection);
    cmd->add_option("--seed", pc.seed);
    cmd->add_option("--out", eval_out, "Output directory")->required();
  };
  auto* identify = app.add_subcommand("identify", "Leave-one-text-out reader identification");
  add_eval_options(identify);
  identify->add_option("--baseline", baseline, "Also run the generative baseline")->check(CLI::IsMember({"generative"}));
  auto* comprehend = app.add_subcommand("comprehend", "Binary text-comprehension prediction");
  add_eval_options(comprehend);

  // report
  auto* report = app.add_subcommand("report", "Summarise a report JSON");
  std::string report_in;
  std::string report_out;
  report->add_option("report", report_in)->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Also write the summary to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (!std::getenv("SCANPATH_THREADS") && threads > 0) set_thread_count(threads);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (*synth) {
      if (!synth_config.empty()) {
        const SynthConfig file = synth_config_from_json(json::parse(read_file(synth_config)));
        // Flags given explicitly win; everything else comes from the file.
        SynthConfig merged = file;
        auto take = [&](const char* flag, auto SynthConfig::*field) {
          if (synth->count(flag) > 0) merged.*field = sc.*field;
        };
        take("--readers", &SynthConfig::num_readers);
        take("--texts", &SynthConfig::num_texts);
        take("--lines", &SynthConfig::lines_per_text);
        take("--words-min", &SynthConfig::words_per_line_min);
        take("--words-max", &SynthConfig::words_per_line_max);
        take("--features", &SynthConfig::num_features);
        take("--sigma", &SynthConfig::reader_sigma);
        take("--fixations-min", &SynthConfig::fixations_min);
        take("--fixations-max", &SynthConfig::fixations_max);
        take("--vocabulary", &SynthConfig::vocabulary);
        take("--zipf", &SynthConfig::zipf_exponent);
        take("--comprehension", &SynthConfig::comprehension_labels);
        take("--seed", &SynthConfig::seed);
        sc = merged;
      }
      try {
        sc.validate();
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
      }
      const SynthDataset data = gen_dataset(sc);
      const fs::path out(synth_out);
      const json prov = provenance(command, to_json(sc), sc.seed, synth_config.empty() ? std::vector<fs::path>{}
                                                                                    : std::vector<fs::path>{synth_config});
      std::vector<Text> texts = data.corpus.texts;
      json texts_json = json::array();
      for (const auto& t : texts) texts_json.push_back(to_json(t));
      const std::string texts_text = texts_json.dump(1) + "\n";
      const std::string freq_text = data.corpus.freq.to_tsv();
      const std::string paths_text = scanpaths_to_jsonl(data.scanpaths);
      write_with_meta(out / "texts.json", texts_text, prov);
      write_with_meta(out / "freq.tsv", freq_text, prov);
      write_with_meta(out / "scanpaths.jsonl", paths_text, prov);
      json truth = ground_truth_json(data);
      truth["dataset"] = {{"texts.json", sha256_hex(texts_text)},
                          {"freq.tsv", sha256_hex(freq_text)},
                          {"scanpaths.jsonl", sha256_hex(paths_text)}};
      truth["provenance"] = prov;
      write_json(out / "ground_truth.json", truth);
      std::cout << "wrote " << data.corpus.texts.size() << " texts and " << data.scanpaths.size()
                << " scanpaths to " << out.string() << "\n";
      return 0;
    }

    if (*fit) {
      try {
        fc.validate();
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
      }
      const Dataset data = fit_data.load();
      const CorpusFeatures features = compute_features(data.texts, data.freq);
      std::vector<SaccadeEvent> events;
      for (auto& e : extract_all(data, features)) events.insert(events.end(), e.begin(), e.end());
      FitResult result;
      try {
        if (events.empty()) throw std::runtime_error("no saccade events in the input");
        result = fit_model(events, static_cast<int>(features.layout.size()), fc, features.layout);
        result.params.validate();
      } catch (const std::exception& e) {
        throw FitFailure(e.what());
      }
      const json config = {{"lambda", fc.lambda}, {"tolerance", fc.tolerance}, {"max_iterations", fc.max_iterations}};
      const json prov = provenance(command, config, nullptr, fit_data.paths());
      json model = to_json(result.params);
      model["norm"] = to_json(features.stats);
      model["provenance"] = prov;
      write_json(fit_out, model);

      json groups = json::array();
      for (const auto& g : result.log) {
        groups.push_back({{"type", g.type},
                          {"group", g.group},
                          {"events", g.events},
                          {"bias_only", g.bias_only},
                          {"converged", g.converged},
                          {"iterations", g.iterations},
                          {"initial_objective", g.initial_objective},
                          {"final_objective", g.final_objective},
                          {"objective_trace", g.trace}});
      }
      json log = {{"events", events.size()}, {"groups", groups}, {"warnings", result.warnings}, {"provenance", prov}};
      log["provenance"]["inputs"]["model"] = sha256_file(fit_out);
      write_json(fit_log.empty() ? fit_out + ".log.json" : fit_log, log);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      return 0;
    }

    if (*score) {
      const Dataset data = score_data.load();
      const json model_json = json::parse(read_file(score_model));
      const ModelParams params = model_params_from_json(model_json);
      if (!model_json.contains("norm")) throw ParseError("model file lacks normalization statistics");
      const NormStats stats = norm_stats_from_json(model_json.at("norm"));
      const CorpusFeatures features = compute_features(data.texts, data.freq, stats);
      if (features.layout != params.layout && !params.layout.empty()) {
        throw ParseError("feature layout of the model does not match the corpus");
      }
      const Eigen::MatrixXd scores = fisher_scores(extract_all(data, features), params);
      json prov = provenance(command, json::object(), nullptr, {score_data.texts, score_data.scanpaths, score_data.freq, score_model});
      json ids = json::array();
      for (const auto& s : data.scanpaths) ids.push_back({s.reader_id, s.text_id, s.line_id});
      prov["rows"] = std::move(ids);
      write_with_meta(score_out, matrix_to_text(scores), prov);
      return 0;
    }

    if (*kernel) {
      const Eigen::MatrixXd train = matrix_from_text(read_file(kernel_train));
      const Eigen::MatrixXd test = kernel_test.empty() ? train : matrix_from_text(read_file(kernel_test));
      if (test.cols() != train.cols()) throw ParseError("score dimensions differ");
      const double ridge = FisherMetric::relative_ridge(train, ridge_factor);
      const FisherMetric metric(train, ridge);
      const Eigen::MatrixXd zt = metric.whiten_rows(train);
      const Eigen::MatrixXd gram = gram_from_whitened(kernel_test.empty() ? zt : metric.whiten_rows(test), zt);
      std::vector<fs::path> inputs{kernel_train};
      if (!kernel_test.empty()) inputs.emplace_back(kernel_test);
      json prov = provenance(command, {{"ridge_factor", ridge_factor}, {"ridge", ridge}}, nullptr, inputs);
      write_with_meta(kernel_out, matrix_to_text(gram), prov);
      return 0;
    }

    if (*train_svm) {
      const Eigen::MatrixXd gram = matrix_from_text(read_file(svm_gram));
      const auto scanpaths = load_scanpaths(svm_labels);
      if (gram.rows() != gram.cols() || static_cast<std::size_t>(gram.rows()) != scanpaths.size()) {
        throw ParseError("Gram matrix must be square with one row per scanpath");
      }
      std::vector<std::string> labels;
      for (const auto& s : scanpaths) labels.push_back(class_of(s));
      const MulticlassModel model = train_multiclass(gram, labels, svm_c, svm_tol);
      json out = to_json(model);
      out["provenance"] = provenance(command, {{"C", svm_c}, {"tol", svm_tol}}, nullptr, {svm_gram, svm_labels});
      write_json(svm_out, out);
      return 0;
    }

    if (*identify || *comprehend) {
      if (!pipeline_config.empty()) {
        PipelineConfig file = pipeline_config_from_json(json::parse(read_file(pipeline_config)));
        if (identify->count("--inner-folds") + comprehend->count("--inner-folds") > 0) file.inner_folds = pc.inner_folds;
        if (identify->count("--seed") + comprehend->count("--seed") > 0) file.seed = pc.seed;
        pc = file;
      }
      if (!lambda_grid.empty()) pc.lambda_grid = parse_grid(lambda_grid);
      if (!c_grid.empty()) pc.c_grid = parse_grid(c_grid);
      if (!ridge_grid.empty()) pc.ridge_grid = parse_grid(ridge_grid);
      if (no_selection) pc.feature_selection = false;
      if (baseline == "generative") pc.generative_baseline = true;
      try {
        pc.validate();
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
      }
      const Dataset data = eval_data.load();
      const EvalReport r = *identify ? loto_cv(data, pc) : binary_comprehension_eval(data, pc);
      const fs::path out(eval_out);
      const json prov = provenance(command, to_json(pc), pc.seed, eval_data.paths());
      json rj = r.to_json();
      rj["provenance"] = prov;
      write_json(out / "report.json", rj);
      write_with_meta(out / "report.csv", r.to_csv(), prov);
      print_report(rj, std::cout);
      return 0;
    }

    if (*report) {
      const json rj = json::parse(read_file(report_in));
      std::ostringstream os;
      print_report(rj, os);
      std::cout << os.str();
      if (!report_out.empty()) write_file(report_out, os.str());
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 2;
  } catch (const FitFailure& e) {
    std::cerr << "error: fit failed: " << e.what() << "\n";
    return 3;
  } catch (const LeakageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace scanpath
