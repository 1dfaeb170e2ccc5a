#pragma once

#include <span>
#include <vector>

namespace scanpath {

/// Area under the ROC curve as the Mann-Whitney rank statistic; tied scores
/// count one half. Labels are 1 (positive) or 0. Throws if either class is empty.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

struct WilcoxonResult {
  double statistic = 0.0;  // W+ (sum of ranks of positive differences)
  int n = 0;               // non-zero differences
  double p_value = 1.0;    // two-sided
  bool exact = false;
};

inline constexpr int kWilcoxonExactMax = 12;

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped and tied magnitudes share average ranks. The null
/// distribution is exact for n <= 12 and the continuity-corrected normal
/// approximation (with tie correction) above. p = min(1, 2 min(P(W+ <= w), P(W+ >= w))).
/// Throws std::invalid_argument with fewer than 5 non-zero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

struct MeanSe {
  double mean = 0.0;
  double standard_error = 0.0;  // sample std / sqrt(n); 0 for n < 2
};

MeanSe mean_and_standard_error(std::span<const double> values);

}  // namespace scanpath
