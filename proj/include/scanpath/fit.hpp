#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "scanpath/events.hpp"
#include "scanpath/gamma_glm.hpp"

namespace scanpath {

inline constexpr double kPiSmoothing = 1e-6;

struct FitConfig {
  double lambda = 0.0;
  double tolerance = 1e-6;  // on the per-event gradient (infinity norm)
  int max_iterations = 500;

  void validate() const;
};

/// Relative frequencies of the five types; zero-count types get
/// kPiSmoothing before renormalisation. Throws on an empty event set.
std::array<double, kNumSaccadeTypes> fit_pi(std::span<const SaccadeEvent> events);
std::array<double, kNumSaccadeTypes> fit_pi(const std::array<std::size_t, kNumSaccadeTypes>& counts);

/// Observations x > 0 with design rows W for one gamma regression.
struct GammaRegressionData {
  Eigen::MatrixXd design;
  Eigen::VectorXd x;
  Eigen::VectorXd log_x;

  GammaRegressionData() = default;
  GammaRegressionData(Eigen::MatrixXd design, Eigen::VectorXd x);
  Eigen::Index size() const { return x.size(); }
};

struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd gradient;  // [d/d shape weights (M), d/d scale weights (M)]
};

/// Negative gamma log-likelihood with shape exp(W shape_w) and scale
/// exp(W scale_w), plus lambda * sum_m (exp(shape_w[m]) + exp(scale_w[m])).
ObjectiveValue gamma_regression_objective(const Eigen::Ref<const Eigen::VectorXd>& shape_weights,
                                          const Eigen::Ref<const Eigen::VectorXd>& scale_weights,
                                          const GammaRegressionData& data, double lambda);

/// Amplitude objective for events sharing one type (|a| with launch features).
ObjectiveValue neg_loglik_and_grad_amplitude(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                                             std::span<const SaccadeEvent> events, double lambda);
/// Duration objective for events sharing one type (d with landing features).
ObjectiveValue neg_loglik_and_grad_duration(const Eigen::VectorXd& gamma, const Eigen::VectorXd& delta,
                                            std::span<const SaccadeEvent> events, double lambda);

GammaRegressionData amplitude_data(std::span<const SaccadeEvent> events, int type, int m);
GammaRegressionData duration_data(std::span<const SaccadeEvent> events, int type, int m);

/// Method-of-moments start: shape mean^2/var and scale var/mean in the bias
/// component, zeros elsewhere.
Eigen::VectorXd moment_initialization(const GammaRegressionData& data);

struct GroupFitLog {
  int type = 0;
  std::string group;  // "amplitude" or "duration"
  std::size_t events = 0;
  bool bias_only = false;
  bool converged = false;
  int iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::vector<double> trace;
};

struct FitResult {
  ModelParams params;
  std::vector<GroupFitLog> log;
  std::vector<std::string> warnings;
};

/// Regularised maximum likelihood for all parameter groups. Types with fewer
/// than 2M events fall back to a bias-only fit; types without events keep
/// zero weights. Both cases are reported in `warnings`.
FitResult fit_model(std::span<const SaccadeEvent> events, int m, const FitConfig& config,
                    std::vector<std::string> layout = {});

}  // namespace scanpath
