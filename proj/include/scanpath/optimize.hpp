#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace scanpath {

/// Returns f(x) and writes the gradient into `grad` (already sized).
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct OptimizeOptions {
  double gradient_tolerance = 1e-6;  // on the infinity norm
  int max_iterations = 500;
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective at the start and after every accepted step
};

/// Dense BFGS with a strong-Wolfe line search. Superlinear near a smooth
/// minimum; every accepted step satisfies the sufficient-decrease condition,
/// so `trace` is strictly decreasing.
OptimizeResult minimize_bfgs(const ObjectiveFn& f, Eigen::VectorXd x0,
                             const OptimizeOptions& options = {});

}  // namespace scanpath
