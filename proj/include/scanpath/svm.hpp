#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace scanpath {

struct KernelProblem {
  Eigen::MatrixXd gram;
  std::vector<int> labels;  // +1 / -1
  double C = 1.0;

  void validate() const;
};

/// Binary soft-margin SVM in dual form, f(x) = sum_i alpha_i y_i k(x_i, x) + bias.
/// Only support vectors (alpha > 0) are stored; `support` indexes the
/// training instances.
struct SvmModel {
  std::vector<std::size_t> support;
  std::vector<double> alphas;
  std::vector<int> labels;
  double bias = 0.0;
  double C = 1.0;
  std::size_t num_train = 0;

  /// alpha_i for every training instance (zeros off the support).
  Eigen::VectorXd dense_alphas() const;
};

struct SolveTrace {
  int iterations = 0;
  double final_violation = 0.0;
  std::vector<double> dual_objective;  // after every update
  std::vector<double> equality_residual;  // |sum alpha_i y_i| after every update
};

/// SMO with second-order working-set selection on a precomputed kernel.
/// Stops once the maximal KKT violation pair gap falls below `tol`. The bias
/// averages the free support vectors, or is the midpoint of the feasible
/// interval when none are free. Throws std::runtime_error when the kernel
/// is detectably not PSD.
SvmModel solve_dual(const KernelProblem& problem, double tol = 1e-3, SolveTrace* trace = nullptr,
                    int max_iterations = 10000000);

/// sum_i alpha_i y_i k_row[i] + bias; k_row has one entry per training instance.
double decision_value(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& k_row);

nlohmann::json to_json(const SvmModel& model);
SvmModel svm_model_from_json(const nlohmann::json& j);

/// One-vs-rest binary models over a shared Gram matrix; classes are sorted
/// lexicographically and their index is the class id used for tie-breaks.
struct MulticlassModel {
  std::vector<std::string> classes;
  std::vector<SvmModel> models;

  /// Decision values of every class for each row of `k_rows` (rows x classes).
  Eigen::MatrixXd decision_values(const Eigen::MatrixXd& k_rows) const;
};

MulticlassModel train_multiclass(const Eigen::MatrixXd& gram, std::span<const std::string> labels,
                                 double C, double tol = 1e-3);

nlohmann::json to_json(const MulticlassModel& model);
MulticlassModel multiclass_from_json(const nlohmann::json& j);

struct TextPrediction {
  std::size_t predicted = 0;   // class id
  Eigen::VectorXd mean_scores;  // per class
};

/// Averages per-class decision values over the text's lines and picks the
/// best class, lowest id on ties. `k_rows` has one kernel row per line.
TextPrediction predict_text(const MulticlassModel& model, const Eigen::MatrixXd& k_rows);

/// Same from precomputed decision values (lines x classes).
TextPrediction predict_from_decisions(const Eigen::MatrixXd& decisions);

}  // namespace scanpath
