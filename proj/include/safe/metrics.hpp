#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace safe {

/// Area under the ROC curve in its Mann-Whitney form: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
/// Computed from midranks in O(n log n). Throws SingleClassTarget when a
/// class is absent.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Midranks (1-based, ties share the average rank).
std::vector<double> midranks(std::span<const double> values);

enum class WilcoxonMode { Auto, Exact, Normal };

struct WilcoxonResult {
  double statistic;  // U = rank sum of x minus n_x(n_x+1)/2
  double p_value;    // two-sided
  bool exact;
};

/// Two-sample rank-sum test. Auto uses the exact null distribution when
/// n_x + n_y <= 12 and there are no ties, the tie-corrected normal
/// approximation with continuity correction otherwise.
WilcoxonResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y,
                                 WilcoxonMode mode = WilcoxonMode::Auto);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> values);
double median(std::vector<double> values);

}  // namespace safe
