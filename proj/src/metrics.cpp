#include "safe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "safe/error.hpp"

namespace safe {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::InvalidArgument, "auc: scores and labels differ in length");
  const auto ranks = midranks(scores);
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      positive_rank_sum += ranks[i];
      ++n_pos;
    }
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(ErrorCode::SingleClassTarget, "auc needs both classes");
  // Midranks are multiples of 1/2, so every term below is exact in double
  // arithmetic for any realistic n.
  const double u = positive_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Number of size-k subsets of {1..n} for each rank sum, shifted so index 0
// is the minimum sum k(k+1)/2. Uses the standard recurrence on n.
std::vector<double> rank_sum_counts(std::size_t n, std::size_t k) {
  const std::size_t max_u = k * (n - k);
  // table[j][u]: subsets of size j from the elements seen so far with
  // U-statistic u, where U = sum of ranks - j(j+1)/2.
  std::vector<std::vector<double>> table(k + 1, std::vector<double>(max_u + 1, 0.0));
  table[0][0] = 1.0;
  for (std::size_t element = 1; element <= n; ++element) {
    for (std::size_t j = std::min(k, element); j >= 1; --j) {
      // choosing this element as the j-th smallest adds (element - j) to U
      const std::size_t shift = element - j;
      for (std::size_t u = max_u + 1; u-- > shift;)
        table[j][u] += table[j - 1][u - shift];
    }
  }
  return table[k];
}

}  // namespace

WilcoxonResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y,
                                 WilcoxonMode mode) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::InvalidArgument, "wilcoxon needs nonempty samples");
  const std::size_t nx = x.size(), ny = y.size(), n = nx + ny;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = midranks(pooled);
  double rank_sum_x = 0.0;
  for (std::size_t i = 0; i < nx; ++i) rank_sum_x += ranks[i];
  const double u = rank_sum_x - 0.5 * static_cast<double>(nx) * static_cast<double>(nx + 1);

  // tie groups
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool has_ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (j - i > 1) has_ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  const bool exact = mode == WilcoxonMode::Exact ||
                     (mode == WilcoxonMode::Auto && n <= 12 && !has_ties);
  if (exact) {
    if (has_ties) throw Error(ErrorCode::InvalidArgument, "exact wilcoxon requires tie-free samples");
    const auto counts = rank_sum_counts(n, nx);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto observed = static_cast<std::size_t>(std::llround(u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t v = 0; v < counts.size(); ++v) {
      if (v <= observed) lower += counts[v];
      if (v >= observed) upper += counts[v];
    }
    const double p = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    return {u, p, true};
  }

  const double nxd = static_cast<double>(nx), nyd = static_cast<double>(ny), nd = static_cast<double>(n);
  const double variance = nxd * nyd / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  double z = u - nxd * nyd / 2.0;
  if (variance <= 0.0) return {u, 1.0, false};
  const double correction = z > 0 ? 0.5 : (z < 0 ? -0.5 : 0.0);
  z = (z - correction) / std::sqrt(variance);
  const double p = std::min(1.0, 2.0 * std::min(normal_cdf(z), 1.0 - normal_cdf(z)));
  return {u, p, false};
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "median of empty sequence");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace safe
