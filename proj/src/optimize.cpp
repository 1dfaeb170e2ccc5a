#include "scanpath/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scanpath {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kCurvature = 0.9;
constexpr int kMaxLineEvaluations = 40;

struct Probe {
  double step;
  double value;
  double slope;  // directional derivative
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

class LineSearch {
 public:
  LineSearch(const ObjectiveFn& f, const Eigen::VectorXd& x, double value,
             const Eigen::VectorXd& direction, double slope, int& evaluations)
      : f_(f), x_(x), value_(value), dir_(direction), slope_(slope), evaluations_(evaluations) {}

  // Strong Wolfe search; returns false if no acceptable step was found.
  bool run(double initial_step, Probe& accepted) {
    Probe prev{0.0, value_, slope_, x_, {}};
    double step = initial_step;
    for (int i = 0; i < kMaxLineEvaluations; ++i) {
      Probe cur = evaluate(step);
      if (!std::isfinite(cur.value)) {
        step *= 0.5;
        continue;
      }
      if (cur.value > value_ + kArmijo * step * slope_ || (i > 0 && cur.value >= prev.value)) {
        return zoom(prev, cur, accepted);
      }
      if (std::abs(cur.slope) <= -kCurvature * slope_) {
        accepted = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, accepted);
      prev = std::move(cur);
      step *= 2.0;
    }
    return false;
  }

 private:
  Probe evaluate(double step) {
    Probe p;
    p.step = step;
    p.x = x_ + step * dir_;
    p.grad = Eigen::VectorXd::Zero(x_.size());
    p.value = f_(p.x, p.grad);
    ++evaluations_;
    p.slope = p.grad.dot(dir_);
    if (!p.grad.allFinite()) p.value = std::numeric_limits<double>::infinity();
    return p;
  }

  bool zoom(Probe lo, Probe hi, Probe& accepted) {
    for (int i = 0; i < kMaxLineEvaluations; ++i) {
      // Cubic interpolation between the bracket ends, safeguarded to the
      // interior; falls back to bisection.
      double step = 0.5 * (lo.step + hi.step);
      const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (lo.step - hi.step);
      const double disc = d1 * d1 - lo.slope * hi.slope;
      if (std::isfinite(hi.value) && disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), hi.step - lo.step);
        const double cubic = hi.step - (hi.step - lo.step) * (hi.slope + d2 - d1) /
                                           (hi.slope - lo.slope + 2.0 * d2);
        const double a = std::min(lo.step, hi.step);
        const double b = std::max(lo.step, hi.step);
        const double margin = 0.1 * (b - a);
        if (std::isfinite(cubic) && cubic > a + margin && cubic < b - margin) step = cubic;
      }
      if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, std::abs(lo.step))) break;
      Probe cur = evaluate(step);
      if (!std::isfinite(cur.value) || cur.value > value_ + kArmijo * step * slope_ ||
          cur.value >= lo.value) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -kCurvature * slope_) {
        accepted = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    // Accept the best sufficient-decrease point found, if any.
    if (lo.step > 0.0 && lo.value < value_) {
      accepted = std::move(lo);
      return true;
    }
    return false;
  }

  const ObjectiveFn& f_;
  const Eigen::VectorXd& x_;
  double value_;
  const Eigen::VectorXd& dir_;
  double slope_;
  int& evaluations_;
};

}  // namespace

OptimizeResult minimize_bfgs(const ObjectiveFn& f, Eigen::VectorXd x0,
                             const OptimizeOptions& options) {
  if (!(options.gradient_tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (options.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  const auto n = x0.size();
  OptimizeResult r;
  r.x = std::move(x0);
  r.gradient = Eigen::VectorXd::Zero(n);
  r.value = f(r.x, r.gradient);
  r.evaluations = 1;
  if (!std::isfinite(r.value) || !r.gradient.allFinite()) {
    throw std::runtime_error("minimize_bfgs: objective not finite at the starting point");
  }
  r.trace.push_back(r.value);

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool fresh_hessian = true;
  while (r.iterations < options.max_iterations) {
    if (r.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      r.converged = true;
      break;
    }
    Eigen::VectorXd direction = -inv_hessian * r.gradient;
    double slope = direction.dot(r.gradient);
    if (!(slope < 0.0)) {
      inv_hessian.setIdentity();
      fresh_hessian = true;
      direction = -r.gradient;
      slope = direction.dot(r.gradient);
    }
    const double initial_step =
        fresh_hessian ? std::min(1.0, 1.0 / r.gradient.lpNorm<Eigen::Infinity>()) : 1.0;
    Probe next;
    LineSearch search(f, r.x, r.value, direction, slope, r.evaluations);
    if (!search.run(initial_step, next)) {
      if (fresh_hessian) break;  // steepest descent made no progress either
      inv_hessian.setIdentity();
      fresh_hessian = true;
      continue;
    }
    const Eigen::VectorXd s = next.x - r.x;
    const Eigen::VectorXd y = next.grad - r.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_hessian) inv_hessian *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      inv_hessian = (id - rho * s * y.transpose()) * inv_hessian * (id - rho * y * s.transpose()) +
                    rho * s * s.transpose();
      fresh_hessian = false;
    }
    r.x = std::move(next.x);
    r.gradient = std::move(next.grad);
    r.value = next.value;
    r.trace.push_back(r.value);
    ++r.iterations;
  }
  if (!r.converged && r.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
    r.converged = true;
  }
  return r;
}

}  // namespace scanpath
