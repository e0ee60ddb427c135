#pragma once

// Slow, obviously-correct reference implementations used by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Normal mean-change objective of a segmentation given by segment end
// indices (inclusive, last one is m-1). mbic=false uses lambda per changepoint.
inline double segmentation_objective(const std::vector<double>& v, const std::vector<std::size_t>& ends, double sigma,
                                     bool mbic, double lambda) {
  const double m = static_cast<double>(v.size());
  double cost = 0.0;
  std::size_t start = 0;
  for (auto end : ends) {
    double mean = 0.0;
    for (std::size_t t = start; t <= end; ++t) mean += v[t];
    mean /= static_cast<double>(end - start + 1);
    for (std::size_t t = start; t <= end; ++t) cost += (v[t] - mean) * (v[t] - mean) / (2.0 * sigma * sigma);
    if (mbic) cost += 0.5 * std::log(static_cast<double>(end - start + 1) / m);
    start = end + 1;
  }
  const double k = static_cast<double>(ends.size() - 1);
  cost += mbic ? 1.5 * k * std::log(m) : lambda * k;
  return cost;
}

struct BestSegmentation {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> changepoints;
};

// Enumerates all 2^(m-1) segmentations.
inline BestSegmentation brute_force_changepoints(const std::vector<double>& v, double sigma, bool mbic, double lambda) {
  BestSegmentation best;
  const std::size_t m = v.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (m - 1)); ++mask) {
    std::vector<std::size_t> ends, cps;
    for (std::size_t i = 0; i + 1 < m; ++i)
      if (mask >> i & 1) {
        ends.push_back(i);
        cps.push_back(i);
      }
    ends.push_back(m - 1);
    const double c = segmentation_objective(v, ends, sigma, mbic, lambda);
    if (c < best.cost) best = {c, cps};
  }
  return best;
}

inline double sigma_from_median_differences(const std::vector<double>& v) {
  std::vector<double> d;
  for (std::size_t i = 1; i < v.size(); ++i) d.push_back(std::abs(v[i] - v[i - 1]));
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double med = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return med / (0.6745 * std::sqrt(2.0));
}

// Fraction of (positive, negative) pairs ordered correctly, ties as one half.
inline double pair_count_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

// Minimum within-cluster SSE over partitions of the sorted values into k
// contiguous blocks. Returns block id per sorted position.
inline std::vector<std::size_t> best_contiguous_partition(const std::vector<double>& sorted, std::size_t k) {
  const std::size_t n = sorted.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_ids;
  // Choose k-1 boundaries among n-1 gaps.
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != k - 1) continue;
    std::vector<std::size_t> ids(n);
    std::size_t id = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ids[i] = id;
      if (i + 1 < n && (mask >> i & 1)) ++id;
    }
    double sse = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      double sum = 0.0, cnt = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (ids[i] == g) {
          sum += sorted[i];
          cnt += 1.0;
        }
      for (std::size_t i = 0; i < n; ++i)
        if (ids[i] == g) sse += (sorted[i] - sum / cnt) * (sorted[i] - sum / cnt);
    }
    if (sse < best) {
      best = sse;
      best_ids = ids;
    }
  }
  return best_ids;
}

// Complete linkage on sorted distinct 1-D values: the linkage distance of two
// clusters is the span of their union, so the cheapest merge is always between
// neighbours. Returns block id per sorted position.
inline std::vector<std::size_t> complete_linkage_blocks(const std::vector<double>& sorted, std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  for (std::size_t i = 0; i < sorted.size(); ++i) blocks.push_back({i, i});
  while (blocks.size() > k) {
    std::size_t best = 0;
    for (std::size_t b = 1; b + 1 < blocks.size(); ++b)
      if (sorted[blocks[b + 1].second] - sorted[blocks[b].first] <
          sorted[blocks[best + 1].second] - sorted[blocks[best].first])
        best = b;
    blocks[best].second = blocks[best + 1].second;
    blocks.erase(blocks.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }
  std::vector<std::size_t> ids(sorted.size());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t i = blocks[b].first; i <= blocks[b].second; ++i) ids[i] = b;
  return ids;
}

// Exact two-sided rank-sum p-value by enumerating every assignment of the
// ranks 1..n to x (tie-free data).
inline double enumerate_rank_sum_p(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t nx = x.size(), n = x.size() + y.size();
  std::vector<double> all(x);
  all.insert(all.end(), y.begin(), y.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return all[a] < all[b]; });
  std::vector<double> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = static_cast<double>(r + 1);
  double observed = 0.0;
  for (std::size_t i = 0; i < nx; ++i) observed += rank[i];
  const double center = static_cast<double>(nx) * static_cast<double>(n + 1) / 2.0;
  const double dev = std::abs(observed - center);

  double extreme = 0.0, total = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != nx) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (mask >> r & 1) sum += static_cast<double>(r + 1);
    total += 1.0;
    if (std::abs(sum - center) >= dev - 1e-9) extreme += 1.0;
  }
  return std::min(1.0, extreme / total);
}

// Plain gradient descent on the penalized mean log-loss (intercept first).
inline std::vector<double> gradient_descent_logistic(const std::vector<std::vector<double>>& x,
                                                     const std::vector<std::uint8_t>& y, double ridge,
                                                     std::size_t iterations, double step) {
  const std::size_t n = x.size(), p = x.empty() ? 0 : x[0].size();
  std::vector<double> beta(p + 1, 0.0), grad(p + 1);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double eta = beta[0];
      for (std::size_t j = 0; j < p; ++j) eta += beta[j + 1] * x[i][j];
      const double r = 1.0 / (1.0 + std::exp(-eta)) - y[i];
      grad[0] += r / static_cast<double>(n);
      for (std::size_t j = 0; j < p; ++j) grad[j + 1] += r * x[i][j] / static_cast<double>(n);
    }
    for (std::size_t j = 1; j <= p; ++j) grad[j] += ridge * beta[j];
    for (std::size_t j = 0; j <= p; ++j) beta[j] -= step * grad[j];
  }
  return beta;
}

}  // namespace oracle
