#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "scanpath/special.hpp"

using namespace scanpath;

TEST_CASE("digamma at 1 is minus the Euler-Mascheroni constant") {
  // gamma = lim (H_n - ln n); accelerate with the 1/(2n) - 1/(12 n^2) correction.
  const int n = 10000;
  double harmonic = 0.0;
  for (int k = n; k >= 1; --k) harmonic += 1.0 / k;
  const double nn = n;
  const double euler = harmonic - std::log(nn) - 1.0 / (2.0 * nn) + 1.0 / (12.0 * nn * nn);
  CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-12));
}

TEST_CASE("digamma satisfies the recurrence psi(x + 1) = psi(x) + 1/x") {
  for (double x : {1e-3, 0.1, 0.5, 1.7, 3.2, 5.99, 6.0, 10.5, 100.0, 1e4}) {
    CHECK(digamma(x + 1.0) == doctest::Approx(digamma(x) + 1.0 / x).epsilon(1e-13));
  }
}

TEST_CASE("digamma matches the derivative of log-gamma") {
  for (double x : {0.3, 1.0, 2.5, 7.0, 42.0}) {
    const double h = 1e-5 * x;
    const double fd = (log_gamma(x + h) - log_gamma(x - h)) / (2.0 * h);
    CHECK(digamma(x) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("digamma half-integer values") {
  // psi(1/2) = -gamma - 2 ln 2
  const double euler = 0.57721566490153286061;
  CHECK(std::abs(digamma(0.5) - (-euler - 2.0 * std::log(2.0))) < 1e-12);
  // psi(3/2) = psi(1/2) + 2
  CHECK(std::abs(digamma(1.5) - (2.0 - euler - 2.0 * std::log(2.0))) < 1e-12);
}

TEST_CASE("digamma rejects non-positive arguments") {
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(digamma(-1.5), std::domain_error);
}

TEST_CASE("log_gamma agrees with factorials") {
  double fact = 1.0;
  for (int n = 1; n <= 20; ++n) {
    CHECK(log_gamma(n) == doctest::Approx(std::log(fact)).epsilon(1e-13));
    fact *= n;
  }
}
