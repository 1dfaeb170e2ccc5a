#include "scanpath/fisher.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "scanpath/corpus.hpp"
#include "scanpath/parallel.hpp"
#include "scanpath/special.hpp"

namespace scanpath {

int score_dimension(int m) { return kNumSaccadeTypes * (1 + 4 * m); }

int score_offset(int type, int m) { return (type - 1) * (1 + 4 * m); }

Eigen::VectorXd fisher_score(std::span<const SaccadeEvent> events, const ModelParams& params) {
  const int m = params.dimension();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(score_dimension(m));
  for (const auto& e : events) {
    if (e.type < 1 || e.type > kNumSaccadeTypes) throw std::invalid_argument("bad saccade type");
    if (e.launch.size() != m || e.land.size() != m) {
      throw std::invalid_argument("fisher_score: event feature length differs from M");
    }
    const TypeWeights& tw = params.of(e.type);
    const int base = score_offset(e.type, m);
    g[base] += 1.0 / params.pi[static_cast<std::size_t>(e.type - 1)];

    const double x = std::abs(e.amplitude);
    const double k = link(tw.amp_shape, e.launch);
    const double s = link(tw.amp_scale, e.launch);
    g.segment(base + 1, m) += e.launch * (k * (std::log(x) - digamma(k) - std::log(s)));
    g.segment(base + 1 + m, m) += e.launch * (x / s - k);

    const double dk = link(tw.dur_shape, e.land);
    const double ds = link(tw.dur_scale, e.land);
    g.segment(base + 1 + 2 * m, m) += e.land * (dk * (std::log(e.duration) - digamma(dk) - std::log(ds)));
    g.segment(base + 1 + 3 * m, m) += e.land * (e.duration / ds - dk);
  }
  return g;
}

Eigen::MatrixXd fisher_scores(std::span<const std::vector<SaccadeEvent>> instances,
                              const ModelParams& params) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(instances.size()), score_dimension(params.dimension()));
  parallel_for(instances.size(), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = fisher_score(instances[i], params).transpose();
  });
  return out;
}

FisherMetric::FisherMetric(const Eigen::MatrixXd& scores, double ridge) : ridge_(ridge) {
  if (scores.rows() < 1) throw std::invalid_argument("fisher metric needs at least one score");
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be >= 0");
  const auto d = scores.cols();
  information_ = Eigen::MatrixXd::Zero(d, d);
  information_.selfadjointView<Eigen::Lower>().rankUpdate(scores.transpose(),
                                                          1.0 / static_cast<double>(scores.rows()));
  information_.triangularView<Eigen::StrictlyUpper>() = information_.transpose();
  Eigen::MatrixXd ridged = information_;
  ridged.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(ridged);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
    throw std::runtime_error("Fisher information + ridge is not positive definite (ridge " +
                             std::to_string(ridge) + "); use a larger ridge");
  }
  lower_ = llt.matrixL();
}

double FisherMetric::relative_ridge(const Eigen::MatrixXd& scores, double factor) {
  if (scores.rows() < 1 || scores.cols() < 1) return factor;
  const double trace = scores.squaredNorm() / static_cast<double>(scores.rows());
  return trace > 0.0 ? factor * trace / static_cast<double>(scores.cols()) : factor;
}

Eigen::VectorXd FisherMetric::whiten(const Eigen::Ref<const Eigen::VectorXd>& g) const {
  if (g.size() != information_.rows()) throw std::invalid_argument("score dimension mismatch");
  return lower_.triangularView<Eigen::Lower>().solve(g);
}

Eigen::MatrixXd FisherMetric::whiten_rows(const Eigen::MatrixXd& scores) const {
  if (scores.cols() != information_.rows()) throw std::invalid_argument("score dimension mismatch");
  Eigen::MatrixXd zt = lower_.triangularView<Eigen::Lower>().solve(scores.transpose());
  return zt.transpose();
}

double FisherMetric::kernel(const Eigen::Ref<const Eigen::VectorXd>& gi,
                            const Eigen::Ref<const Eigen::VectorXd>& gj) const {
  return whiten(gi).dot(whiten(gj));
}

Eigen::MatrixXd gram_from_whitened(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("gram: dimension mismatch");
  return a * b.transpose();
}

std::string matrix_to_text(const Eigen::MatrixXd& rows) {
  std::string out = std::to_string(rows.cols()) + " " + std::to_string(rows.rows()) + "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", rows(i, j));
      if (j) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd matrix_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  long d = -1;
  long n = -1;
  if (!(in >> d >> n) || d < 0 || n < 0) throw ParseError("matrix file: bad 'D N' header");
  Eigen::MatrixXd m(n, d);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < d; ++j) {
      if (!(in >> m(i, j))) {
        throw ParseError("matrix file: row " + std::to_string(i) + " is short");
      }
    }
  }
  return m;
}

}  // namespace scanpath
