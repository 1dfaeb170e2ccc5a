#pragma once

namespace scanpath {

/// Digamma function psi(x) = d/dx ln Gamma(x) for x > 0.
///
/// Shifts the argument with psi(x) = psi(x + 1) - 1/x until x >= 6 and then
/// evaluates the asymptotic (Bernoulli) series. Absolute error is below 1e-12
/// over the positive axis. Throws std::domain_error for x <= 0 or NaN.
double digamma(double x);

/// ln Gamma(x) for x > 0, reentrant.
double log_gamma(double x);

}  // namespace scanpath
