#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scanpath/events.hpp"
#include "scanpath/gamma_glm.hpp"

namespace scanpath {

/// D = 5 (1 + 4M). Per type u the block is [pi_u, alpha_u, beta_u, gamma_u, delta_u].
int score_dimension(int m);
int score_offset(int type, int m);

/// Unregularised log-likelihood gradient at `params`:
///   pi_u:    K_u / pi_u
///   alpha_u: sum_t w_launch * k (ln|a| - psi(k) - beta_u . w_launch),  k = exp(alpha_u . w_launch)
///   beta_u:  sum_t w_launch * (|a| exp(-beta_u . w_launch) - k)
///   gamma_u, delta_u: the same with d and w_land.
/// An empty event list yields the zero vector.
Eigen::VectorXd fisher_score(std::span<const SaccadeEvent> events, const ModelParams& params);

/// One score row per instance.
Eigen::MatrixXd fisher_scores(std::span<const std::vector<SaccadeEvent>> instances,
                              const ModelParams& params);

/// Empirical Fisher information I = (1/N) sum g g^T with a ridge, stored as
/// the Cholesky factor of I + ridge * Id. Kernel values g_i^T (I + ridge Id)^-1 g_j
/// are inner products of whitened scores z = L^-1 g.
class FisherMetric {
 public:
  /// `scores` holds one score per row. Throws std::runtime_error if the
  /// ridged matrix is not positive definite.
  FisherMetric(const Eigen::MatrixXd& scores, double ridge);

  /// factor * trace(I) / D, or `factor` itself when the trace vanishes.
  static double relative_ridge(const Eigen::MatrixXd& scores, double factor);

  const Eigen::MatrixXd& information() const { return information_; }
  const Eigen::MatrixXd& cholesky_factor() const { return lower_; }
  double ridge() const { return ridge_; }
  int dimension() const { return static_cast<int>(information_.rows()); }

  Eigen::VectorXd whiten(const Eigen::Ref<const Eigen::VectorXd>& g) const;
  /// Whitens every row of `scores`.
  Eigen::MatrixXd whiten_rows(const Eigen::MatrixXd& scores) const;
  double kernel(const Eigen::Ref<const Eigen::VectorXd>& gi,
                const Eigen::Ref<const Eigen::VectorXd>& gj) const;

 private:
  Eigen::MatrixXd information_;
  Eigen::MatrixXd lower_;
  double ridge_;
};

/// Kernel block between two sets of whitened rows.
Eigen::MatrixXd gram_from_whitened(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Text matrix: header "D N", then N rows of D values.
std::string matrix_to_text(const Eigen::MatrixXd& rows);
Eigen::MatrixXd matrix_from_text(std::string_view text);

}  // namespace scanpath
