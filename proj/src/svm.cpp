#include "scanpath/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "scanpath/corpus.hpp"
#include "scanpath/parallel.hpp"

namespace scanpath {

using nlohmann::json;

Eigen::VectorXd SvmModel::dense_alphas() const {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_train));
  for (std::size_t k = 0; k < support.size(); ++k) a[static_cast<Eigen::Index>(support[k])] = alphas[k];
  return a;
}

namespace {

constexpr double kTau = 1e-12;

class SmoSolver {
 public:
  SmoSolver(const Eigen::MatrixXd& gram, const std::vector<int>& labels, double c, double tol,
            SolveTrace* trace)
      : k_(gram), y_(labels), c_(c), tol_(tol), trace_(trace), n_(gram.rows()) {
    alpha_ = Eigen::VectorXd::Zero(n_);
    grad_ = Eigen::VectorXd::Constant(n_, -1.0);
    scale_ = std::max(1.0, k_.diagonal().maxCoeff());
    diag_ = k_.diagonal();
    yd_.resize(n_);
    for (Eigen::Index t = 0; t < n_; ++t) yd_[t] = y(t);
  }

  SvmModel solve(int max_iterations) {
    int iter = 0;
    double violation = 0.0;
    while (iter < max_iterations) {
      Eigen::Index i = -1;
      Eigen::Index j = -1;
      violation = select(i, j);
      if (violation < tol_ || j < 0) break;
      update(i, j);
      ++iter;
      if (trace_) {
        trace_->dual_objective.push_back(dual_objective());
        double eq = 0.0;
        for (Eigen::Index t = 0; t < n_; ++t) eq += alpha_[t] * y_[static_cast<std::size_t>(t)];
        trace_->equality_residual.push_back(std::abs(eq));
      }
    }
    if (trace_) {
      trace_->iterations = iter;
      trace_->final_violation = std::max(0.0, violation);
    }
    return build_model();
  }

 private:
  int y(Eigen::Index t) const { return y_[static_cast<std::size_t>(t)]; }
  bool in_up(Eigen::Index t) const { return (y(t) > 0 && alpha_[t] < c_) || (y(t) < 0 && alpha_[t] > 0.0); }
  bool in_low(Eigen::Index t) const { return (y(t) > 0 && alpha_[t] > 0.0) || (y(t) < 0 && alpha_[t] < c_); }

  // Returns m(alpha) - M(alpha); picks i maximising -y G over I_up and j by
  // second-order gain over I_low.
  double select(Eigen::Index& out_i, Eigen::Index& out_j) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n_; ++t) {
      if (in_up(t) && -y(t) * grad_[t] > gmax) {
        gmax = -y(t) * grad_[t];
        i = t;
      }
    }
    if (i < 0) return 0.0;
    Eigen::Index j = -1;
    double best_gain = std::numeric_limits<double>::infinity();
    // The gram matrix is symmetric, so column i is row i in contiguous memory.
    const double* ki = k_.col(i).data();
    const double kii = diag_[i];
    for (Eigen::Index t = 0; t < n_; ++t) {
      if (!in_low(t)) continue;
      const double v = -y(t) * grad_[t];
      gmin = std::min(gmin, v);
      const double b = gmax - v;
      if (b > 0.0) {
        double a = kii + diag_[t] - 2.0 * ki[t];
        check_psd(a);
        if (a <= 0.0) a = kTau;
        const double gain = -(b * b) / a;
        if (gain < best_gain) {
          best_gain = gain;
          j = t;
        }
      }
    }
    out_i = i;
    out_j = j;
    return gmax - gmin;
  }

  void check_psd(double curvature) const {
    if (curvature < -1e-8 * scale_) {
      throw std::runtime_error(
          "kernel matrix is not positive semidefinite (negative pair curvature " +
          std::to_string(curvature) + "); increase the Fisher metric ridge");
    }
  }

  void update(Eigen::Index i, Eigen::Index j) {
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double a = k_(i, i) + k_(j, j) - 2.0 * k_(i, j);
    if (a <= 0.0) a = kTau;
    if (y(i) != y(j)) {
      const double delta = (-grad_[i] - grad_[j]) / a;
      const double diff = alpha_[i] - alpha_[j];
      alpha_[i] += delta;
      alpha_[j] += delta;
      if (diff > 0.0) {
        if (alpha_[j] < 0.0) { alpha_[j] = 0.0; alpha_[i] = diff; }
      } else {
        if (alpha_[i] < 0.0) { alpha_[i] = 0.0; alpha_[j] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha_[i] > c_) { alpha_[i] = c_; alpha_[j] = c_ - diff; }
      } else {
        if (alpha_[j] > c_) { alpha_[j] = c_; alpha_[i] = c_ + diff; }
      }
    } else {
      const double delta = (grad_[i] - grad_[j]) / a;
      const double sum = alpha_[i] + alpha_[j];
      alpha_[i] -= delta;
      alpha_[j] += delta;
      if (sum > c_) {
        if (alpha_[i] > c_) { alpha_[i] = c_; alpha_[j] = sum - c_; }
      } else {
        if (alpha_[j] < 0.0) { alpha_[j] = 0.0; alpha_[i] = sum; }
      }
      if (sum > c_) {
        if (alpha_[j] > c_) { alpha_[j] = c_; alpha_[i] = sum - c_; }
      } else {
        if (alpha_[i] < 0.0) { alpha_[i] = 0.0; alpha_[j] = sum; }
      }
    }
    const double di = alpha_[i] - old_i;
    const double dj = alpha_[j] - old_j;
    const double ci = y(i) * di;
    const double cj = y(j) * dj;
    grad_.array() += yd_.array() * (k_.col(i).array() * ci + k_.col(j).array() * cj);
  }

  double dual_objective() const {
    // sum alpha - 1/2 alpha^T Q alpha = -(1/2) alpha^T (G - e) ... using G = Q alpha - e.
    return -0.5 * alpha_.dot(grad_ - Eigen::VectorXd::Constant(n_, 1.0));
  }

  SvmModel build_model() const {
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int free = 0;
    for (Eigen::Index t = 0; t < n_; ++t) {
      const double yg = y(t) * grad_[t];
      if (alpha_[t] >= c_) {
        if (y(t) < 0) upper = std::min(upper, yg); else lower = std::max(lower, yg);
      } else if (alpha_[t] <= 0.0) {
        if (y(t) > 0) upper = std::min(upper, yg); else lower = std::max(lower, yg);
      } else {
        ++free;
        sum_free += yg;
      }
    }
    double rho = 0.0;
    if (free > 0) {
      rho = sum_free / free;
    } else if (std::isfinite(upper) && std::isfinite(lower)) {
      rho = 0.5 * (upper + lower);
    } else if (std::isfinite(upper)) {
      rho = upper;
    } else if (std::isfinite(lower)) {
      rho = lower;
    }
    SvmModel m;
    m.bias = -rho;
    m.C = c_;
    m.num_train = static_cast<std::size_t>(n_);
    for (Eigen::Index t = 0; t < n_; ++t) {
      if (alpha_[t] > 0.0) {
        m.support.push_back(static_cast<std::size_t>(t));
        m.alphas.push_back(alpha_[t]);
        m.labels.push_back(y(t));
      }
    }
    return m;
  }

  const Eigen::MatrixXd& k_;
  const std::vector<int>& y_;
  double c_;
  double tol_;
  SolveTrace* trace_;
  Eigen::Index n_;
  double scale_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd grad_;
  Eigen::VectorXd diag_;
  Eigen::VectorXd yd_;
};

void validate_problem(const Eigen::MatrixXd& gram, const std::vector<int>& labels, double c) {
  const auto n = gram.rows();
  if (gram.cols() != n) throw std::invalid_argument("gram matrix must be square");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("label count differs from gram size");
  if (!(c > 0.0)) throw std::invalid_argument("C must be positive");
  for (int y : labels) {
    if (y != 1 && y != -1) throw std::invalid_argument("labels must be +1 or -1");
  }
  if (std::count(labels.begin(), labels.end(), 1) == 0 || std::count(labels.begin(), labels.end(), -1) == 0) {
    throw std::invalid_argument("both classes must be present");
  }
  if (!gram.allFinite()) throw std::invalid_argument("gram matrix has non-finite entries");
  const double scale = std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(gram(i, j) - gram(j, i)) > 1e-9 * scale) {
        throw std::invalid_argument("gram matrix is not symmetric");
      }
    }
  }
}

SvmModel solve_gram(const Eigen::MatrixXd& gram, const std::vector<int>& labels, double c, double tol,
                    SolveTrace* trace, int max_iterations) {
  validate_problem(gram, labels, c);
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if ((gram.diagonal().array() < -1e-12).any()) {
    throw std::runtime_error("kernel matrix has a negative diagonal entry; increase the Fisher metric ridge");
  }
  SmoSolver solver(gram, labels, c, tol, trace);
  return solver.solve(max_iterations);
}

}  // namespace

void KernelProblem::validate() const { validate_problem(gram, labels, C); }

SvmModel solve_dual(const KernelProblem& problem, double tol, SolveTrace* trace, int max_iterations) {
  return solve_gram(problem.gram, problem.labels, problem.C, tol, trace, max_iterations);
}

double decision_value(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& k_row) {
  if (static_cast<std::size_t>(k_row.size()) != model.num_train) {
    throw std::invalid_argument("decision_value: kernel row length " + std::to_string(k_row.size()) +
                                " differs from training size " + std::to_string(model.num_train));
  }
  double f = model.bias;
  for (std::size_t k = 0; k < model.support.size(); ++k) {
    f += model.alphas[k] * model.labels[k] * k_row[static_cast<Eigen::Index>(model.support[k])];
  }
  return f;
}

json to_json(const SvmModel& m) {
  return {{"alphas", m.alphas}, {"labels", m.labels}, {"support", m.support},
          {"bias", m.bias},     {"C", m.C},           {"num_train", m.num_train}};
}

SvmModel svm_model_from_json(const json& j) {
  try {
    SvmModel m;
    m.alphas = j.at("alphas").get<std::vector<double>>();
    m.labels = j.at("labels").get<std::vector<int>>();
    m.support = j.at("support").get<std::vector<std::size_t>>();
    m.bias = j.at("bias").get<double>();
    m.C = j.at("C").get<double>();
    m.num_train = j.at("num_train").get<std::size_t>();
    if (m.alphas.size() != m.support.size() || m.labels.size() != m.support.size()) {
      throw ParseError("svm model: alphas/labels/support lengths differ");
    }
    for (auto s : m.support) {
      if (s >= m.num_train) throw ParseError("svm model: support index out of range");
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed svm model: ") + e.what());
  }
}

Eigen::MatrixXd MulticlassModel::decision_values(const Eigen::MatrixXd& k_rows) const {
  Eigen::MatrixXd out(k_rows.rows(), static_cast<Eigen::Index>(models.size()));
  for (Eigen::Index r = 0; r < k_rows.rows(); ++r) {
    for (std::size_t c = 0; c < models.size(); ++c) {
      out(r, static_cast<Eigen::Index>(c)) = decision_value(models[c], k_rows.row(r).transpose());
    }
  }
  return out;
}

MulticlassModel train_multiclass(const Eigen::MatrixXd& gram, std::span<const std::string> labels,
                                 double C, double tol) {
  MulticlassModel out;
  out.classes.assign(labels.begin(), labels.end());
  std::sort(out.classes.begin(), out.classes.end());
  out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
  if (out.classes.size() < 2) throw std::invalid_argument("train_multiclass: need at least 2 classes");
  out.models.resize(out.classes.size());
  parallel_for(out.classes.size(), [&](std::size_t c) {
    std::vector<int> y;
    y.reserve(labels.size());
    for (const auto& l : labels) y.push_back(l == out.classes[c] ? 1 : -1);
    out.models[c] = solve_gram(gram, y, C, tol, nullptr, 10000000);
  });
  return out;
}

json to_json(const MulticlassModel& m) {
  json classes = json::array();
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    json jc = to_json(m.models[c]);
    jc["class"] = m.classes[c];
    classes.push_back(std::move(jc));
  }
  return {{"scheme", "one-vs-rest"}, {"classes", std::move(classes)}};
}

MulticlassModel multiclass_from_json(const json& j) {
  MulticlassModel m;
  try {
    for (const auto& jc : j.at("classes")) {
      m.classes.push_back(jc.at("class").get<std::string>());
      m.models.push_back(svm_model_from_json(jc));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed multiclass model: ") + e.what());
  }
  if (!std::is_sorted(m.classes.begin(), m.classes.end())) {
    throw ParseError("multiclass model: classes must be sorted");
  }
  return m;
}

TextPrediction predict_from_decisions(const Eigen::MatrixXd& decisions) {
  if (decisions.rows() < 1) throw std::invalid_argument("predict_text: no lines");
  TextPrediction p;
  p.mean_scores.resize(decisions.cols());
  for (Eigen::Index c = 0; c < decisions.cols(); ++c) {
    // Sorted summation keeps the mean independent of line order.
    std::vector<double> col(decisions.col(c).data(), decisions.col(c).data() + decisions.rows());
    std::sort(col.begin(), col.end());
    double sum = 0.0;
    for (double v : col) sum += v;
    p.mean_scores[c] = sum / static_cast<double>(col.size());
  }
  p.predicted = 0;
  for (Eigen::Index c = 1; c < p.mean_scores.size(); ++c) {
    if (p.mean_scores[c] > p.mean_scores[static_cast<Eigen::Index>(p.predicted)]) {
      p.predicted = static_cast<std::size_t>(c);
    }
  }
  return p;
}

TextPrediction predict_text(const MulticlassModel& model, const Eigen::MatrixXd& k_rows) {
  return predict_from_decisions(model.decision_values(k_rows));
}

}  // namespace scanpath
