#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "scanpath/events.hpp"
#include "scanpath/gamma_glm.hpp"
#include "scanpath/random.hpp"

namespace testutil {

using scanpath::Rng;

// Random feature row with the bias in column 0.
inline Eigen::VectorXd random_features(Rng& rng, int m) {
  Eigen::VectorXd w(m);
  w[0] = 1.0;
  for (int i = 1; i < m; ++i) w[i] = scanpath::sample_normal(rng, 0.0, 1.0);
  return w;
}

inline Eigen::MatrixXd random_pool(Rng& rng, int m, int rows) {
  Eigen::MatrixXd pool(rows, m);
  for (int r = 0; r < rows; ++r) pool.row(r) = random_features(rng, m).transpose();
  return pool;
}

inline scanpath::ModelParams random_params(Rng& rng, int m) {
  scanpath::ModelParams p = scanpath::ModelParams::zeros(m);
  double sum = 0.0;
  for (auto& v : p.pi) {
    v = 0.05 + scanpath::uniform01(rng);
    sum += v;
  }
  for (auto& v : p.pi) v /= sum;
  for (auto& t : p.types) {
    for (Eigen::VectorXd* v : {&t.amp_shape, &t.amp_scale, &t.dur_shape, &t.dur_scale}) {
      for (int i = 0; i < m; ++i) (*v)[i] = scanpath::sample_normal(rng, 0.0, 0.2);
    }
    t.amp_shape[0] += std::log(1.0 + 3.0 * scanpath::uniform01(rng));
    t.amp_scale[0] += std::log(1.0 + 4.0 * scanpath::uniform01(rng));
    t.dur_shape[0] += std::log(2.0 + 5.0 * scanpath::uniform01(rng));
    t.dur_scale[0] += std::log(20.0 + 30.0 * scanpath::uniform01(rng));
  }
  return p;
}

// Events with arbitrary (not model-drawn) values, for gradient checks.
inline std::vector<scanpath::SaccadeEvent> random_events(Rng& rng, int m, int n) {
  std::vector<scanpath::SaccadeEvent> out;
  for (int i = 0; i < n; ++i) {
    scanpath::SaccadeEvent e;
    e.type = scanpath::uniform_int(rng, 1, 5);
    e.launch = random_features(rng, m);
    e.land = random_features(rng, m);
    const double mag = 0.5 + 10.0 * scanpath::uniform01(rng);
    e.amplitude = (e.type == 1 || e.type == 5) ? -mag : mag;
    e.duration = 40.0 + 400.0 * scanpath::uniform01(rng);
    out.push_back(std::move(e));
  }
  return out;
}

// Central difference of f along every coordinate of x.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double step = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd a = x;
    Eigen::VectorXd b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// Max over coordinates of |a - b| / max(1, |a|, |b|).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// Dense inverse by Gauss-Jordan elimination with partial pivoting.
inline Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index pivot = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
    }
    if (a(pivot, c) == 0.0) throw std::runtime_error("singular matrix");
    a.row(c).swap(a.row(pivot));
    inv.row(c).swap(inv.row(pivot));
    const double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      if (f == 0.0) continue;
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

// Two-sided signed-rank p-value by enumerating all 2^n sign assignments of
// the (average) ranks of |d|, zero differences dropped.
inline double wilcoxon_enumerated(const std::vector<double>& d) {
  std::vector<double> mags;
  for (double v : d) {
    if (v != 0.0) mags.push_back(std::abs(v));
  }
  const std::size_t n = mags.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0.0;
    double equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mags[j] < mags[i]) less += 1.0;
      if (mags[j] == mags[i]) equal += 1.0;
    }
    ranks[i] = less + (equal + 1.0) / 2.0;
  }
  double observed = 0.0;
  std::size_t k = 0;
  for (double v : d) {
    if (v == 0.0) continue;
    if (v > 0.0) observed += ranks[k];
    ++k;
  }
  const std::uint64_t total = std::uint64_t{1} << n;
  std::uint64_t le = 0;
  std::uint64_t ge = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1U) w += ranks[i];
    }
    if (w <= observed + 1e-9) ++le;
    if (w >= observed - 1e-9) ++ge;
  }
  const double p = 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
  return std::min(1.0, p);
}

}  // namespace testutil

namespace testutil {

// Parameter vector in score order: per type [pi, alpha, beta, gamma, delta].
inline Eigen::VectorXd pack(const scanpath::ModelParams& p) {
  const int m = p.dimension();
  Eigen::VectorXd v(5 * (1 + 4 * m));
  Eigen::Index k = 0;
  for (int u = 0; u < 5; ++u) {
    const auto& t = p.types[static_cast<std::size_t>(u)];
    v[k++] = p.pi[static_cast<std::size_t>(u)];
    for (const Eigen::VectorXd* w : {&t.amp_shape, &t.amp_scale, &t.dur_shape, &t.dur_scale}) {
      v.segment(k, m) = *w;
      k += m;
    }
  }
  return v;
}

inline scanpath::ModelParams unpack(const Eigen::VectorXd& v, int m) {
  scanpath::ModelParams p = scanpath::ModelParams::zeros(m);
  Eigen::Index k = 0;
  for (int u = 0; u < 5; ++u) {
    auto& t = p.types[static_cast<std::size_t>(u)];
    p.pi[static_cast<std::size_t>(u)] = v[k++];
    for (Eigen::VectorXd* w : {&t.amp_shape, &t.amp_scale, &t.dur_shape, &t.dur_scale}) {
      *w = v.segment(k, m);
      k += m;
    }
  }
  return p;
}

}  // namespace testutil
