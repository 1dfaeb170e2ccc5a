#include "scanpath/fit.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "scanpath/optimize.hpp"
#include "scanpath/parallel.hpp"
#include "scanpath/special.hpp"

namespace scanpath {

void FitConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
}

std::array<double, kNumSaccadeTypes> fit_pi(const std::array<std::size_t, kNumSaccadeTypes>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("fit_pi: no events");
  std::array<double, kNumSaccadeTypes> pi{};
  double sum = 0.0;
  for (std::size_t u = 0; u < kNumSaccadeTypes; ++u) {
    pi[u] = counts[u] > 0 ? static_cast<double>(counts[u]) / static_cast<double>(total) : kPiSmoothing;
    sum += pi[u];
  }
  for (auto& p : pi) p /= sum;
  return pi;
}

std::array<double, kNumSaccadeTypes> fit_pi(std::span<const SaccadeEvent> events) {
  std::array<std::size_t, kNumSaccadeTypes> counts{};
  for (const auto& e : events) counts.at(static_cast<std::size_t>(e.type - 1))++;
  return fit_pi(counts);
}

GammaRegressionData::GammaRegressionData(Eigen::MatrixXd design_, Eigen::VectorXd x_)
    : design(std::move(design_)), x(std::move(x_)) {
  if (design.rows() != x.size()) throw std::invalid_argument("design/observation size mismatch");
  if ((x.array() <= 0.0).any()) throw std::domain_error("gamma observations must be positive");
  log_x = x.array().log();
}

ObjectiveValue gamma_regression_objective(const Eigen::Ref<const Eigen::VectorXd>& shape_weights,
                                          const Eigen::Ref<const Eigen::VectorXd>& scale_weights,
                                          const GammaRegressionData& data, double lambda) {
  const auto m = shape_weights.size();
  if (scale_weights.size() != m || data.design.cols() != m) {
    throw std::invalid_argument("gamma_regression_objective: dimension mismatch");
  }
  const auto n = data.size();
  const Eigen::VectorXd shape_eta = data.design * shape_weights;
  const Eigen::VectorXd scale_eta = data.design * scale_weights;
  Eigen::VectorXd shape_coef(n);
  Eigen::VectorXd scale_coef(n);
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double k = std::clamp(std::exp(shape_eta[i]), kLinkMin, kLinkMax);
    const double s = std::clamp(std::exp(scale_eta[i]), kLinkMin, kLinkMax);
    const double log_s = std::log(s);
    const double x = data.x[i];
    loglik += (k - 1.0) * data.log_x[i] - x / s - log_gamma(k) - k * log_s;
    shape_coef[i] = k * (data.log_x[i] - digamma(k) - log_s);
    scale_coef[i] = x / s - k;
  }
  ObjectiveValue out;
  out.gradient.resize(2 * m);
  out.gradient.head(m) = -(data.design.transpose() * shape_coef);
  out.gradient.tail(m) = -(data.design.transpose() * scale_coef);
  out.value = -loglik;
  if (lambda > 0.0) {
    const Eigen::ArrayXd es = shape_weights.array().exp();
    const Eigen::ArrayXd ec = scale_weights.array().exp();
    out.value += lambda * (es.sum() + ec.sum());
    out.gradient.head(m).array() += lambda * es;
    out.gradient.tail(m).array() += lambda * ec;
  }
  return out;
}

namespace {

GammaRegressionData group_data(std::span<const SaccadeEvent> events, int type, int m,
                               bool amplitude) {
  std::size_t n = 0;
  for (const auto& e : events) n += (type == 0 || e.type == type);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), m);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  Eigen::Index r = 0;
  for (const auto& e : events) {
    if (type != 0 && e.type != type) continue;
    const Eigen::VectorXd& w = amplitude ? e.launch : e.land;
    if (w.size() != m) throw std::invalid_argument("event feature length differs from M");
    design.row(r) = w.transpose();
    x[r] = amplitude ? std::abs(e.amplitude) : e.duration;
    ++r;
  }
  return GammaRegressionData(std::move(design), std::move(x));
}

int common_dimension(std::span<const SaccadeEvent> events, const Eigen::VectorXd& w) {
  for (const auto& e : events) {
    if (e.launch.size() != w.size()) throw std::invalid_argument("event feature length differs from M");
  }
  return static_cast<int>(w.size());
}

}  // namespace

GammaRegressionData amplitude_data(std::span<const SaccadeEvent> events, int type, int m) {
  return group_data(events, type, m, true);
}

GammaRegressionData duration_data(std::span<const SaccadeEvent> events, int type, int m) {
  return group_data(events, type, m, false);
}

ObjectiveValue neg_loglik_and_grad_amplitude(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                                             std::span<const SaccadeEvent> events, double lambda) {
  const int m = common_dimension(events, alpha);
  return gamma_regression_objective(alpha, beta, amplitude_data(events, 0, m), lambda);
}

ObjectiveValue neg_loglik_and_grad_duration(const Eigen::VectorXd& gamma, const Eigen::VectorXd& delta,
                                            std::span<const SaccadeEvent> events, double lambda) {
  const int m = common_dimension(events, gamma);
  return gamma_regression_objective(gamma, delta, duration_data(events, 0, m), lambda);
}

Eigen::VectorXd moment_initialization(const GammaRegressionData& data) {
  const auto m = data.design.cols();
  Eigen::VectorXd start = Eigen::VectorXd::Zero(2 * m);
  const auto n = data.size();
  if (n == 0) return start;
  const double mean = data.x.mean();
  double var = 0.0;
  if (n > 1) var = (data.x.array() - mean).square().sum() / static_cast<double>(n - 1);
  double shape = 1.0;
  double scale = mean;
  if (var > 0.0) {
    shape = mean * mean / var;
    scale = var / mean;
  }
  start[0] = std::log(std::clamp(shape, kLinkMin, kLinkMax));
  start[m] = std::log(std::clamp(scale, kLinkMin, kLinkMax));
  return start;
}

namespace {

struct GroupJob {
  int type;
  bool amplitude;
};

struct GroupOutcome {
  Eigen::VectorXd shape;
  Eigen::VectorXd scale;
  GroupFitLog log;
  std::string warning;
};

GroupOutcome fit_group(const GammaRegressionData& data, int m, const FitConfig& config) {
  GroupOutcome out;
  out.shape = Eigen::VectorXd::Zero(m);
  out.scale = Eigen::VectorXd::Zero(m);
  out.log.events = static_cast<std::size_t>(data.size());
  if (data.size() == 0) {
    out.warning = "no events; weights left at zero";
    out.log.bias_only = true;
    out.log.converged = true;
    return out;
  }
  const bool bias_only = data.size() < 2 * m;
  out.log.bias_only = bias_only;
  GammaRegressionData fit_data =
      bias_only ? GammaRegressionData(data.design.leftCols(1), data.x) : data;
  const auto k = fit_data.design.cols();
  if (bias_only && m > 1) {
    out.warning = "only " + std::to_string(data.size()) + " events (< 2M = " +
                  std::to_string(2 * m) + "); fitted bias only";
  }
  // The optimiser sees the objective per event so that the gradient
  // tolerance does not depend on the sample size.
  const double n = static_cast<double>(fit_data.size());
  const ObjectiveFn objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    ObjectiveValue v = gamma_regression_objective(x.head(k), x.tail(k), fit_data, config.lambda);
    grad = v.gradient / n;
    return v.value / n;
  };
  OptimizeOptions options;
  options.gradient_tolerance = config.tolerance;
  options.max_iterations = config.max_iterations;
  const OptimizeResult r = minimize_bfgs(objective, moment_initialization(fit_data), options);
  out.shape.head(k) = r.x.head(k);
  out.scale.head(k) = r.x.tail(k);
  out.log.converged = r.converged;
  out.log.iterations = r.iterations;
  for (double f : r.trace) out.log.trace.push_back(f * n);
  out.log.initial_objective = out.log.trace.front();
  out.log.final_objective = r.value * n;
  return out;
}

}  // namespace

FitResult fit_model(std::span<const SaccadeEvent> events, int m, const FitConfig& config,
                    std::vector<std::string> layout) {
  config.validate();
  if (m < 1) throw std::invalid_argument("fit_model: M must be >= 1");
  FitResult result;
  result.params = ModelParams::zeros(m, std::move(layout));
  result.params.pi = fit_pi(events);

  std::vector<GroupJob> jobs;
  for (int u = 1; u <= kNumSaccadeTypes; ++u) {
    jobs.push_back({u, true});
    jobs.push_back({u, false});
  }
  std::vector<GroupOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto& job = jobs[j];
    const GammaRegressionData data = job.amplitude ? amplitude_data(events, job.type, m)
                                                   : duration_data(events, job.type, m);
    outcomes[j] = fit_group(data, m, config);
    outcomes[j].log.type = job.type;
    outcomes[j].log.group = job.amplitude ? "amplitude" : "duration";
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& tw = result.params.of(jobs[j].type);
    auto& o = outcomes[j];
    if (jobs[j].amplitude) {
      tw.amp_shape = o.shape;
      tw.amp_scale = o.scale;
    } else {
      tw.dur_shape = o.shape;
      tw.dur_scale = o.scale;
    }
    if (!o.warning.empty()) {
      std::string w = "type " + std::to_string(jobs[j].type) + " " + o.log.group + ": " + o.warning;
      result.warnings.push_back(std::move(w));
    }
    result.log.push_back(std::move(o.log));
  }
  return result;
}

}  // namespace scanpath
