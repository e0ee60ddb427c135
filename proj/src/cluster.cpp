#include <algorithm>
#include <limits>
#include <numeric>

#include "safe/error.hpp"
#include "safe/extraction.hpp"

namespace safe {

namespace {

constexpr std::size_t kMaxAutoClusters = 10;

struct Cluster {
  std::vector<std::size_t> members;  // ascending level codes
  double lo = 0.0, hi = 0.0;
};

struct Merge {
  std::size_t a = 0, b = 0;  // positions in the active list at merge time
  double height = 0.0;
};

// Full complete-linkage agglomeration. Returns the merge heights in order
// and the cluster list after `stop_at` clusters remain.
std::vector<Cluster> agglomerate(std::span<const double> responses, std::size_t stop_at,
                                 std::vector<double>* heights) {
  std::vector<Cluster> active;
  for (std::size_t l = 0; l < responses.size(); ++l) active.push_back({{l}, responses[l], responses[l]});
  std::vector<Cluster> snapshot;
  if (active.size() <= stop_at) snapshot = active;

  while (active.size() > 1) {
    // Active clusters stay ordered by their smallest member, so scanning
    // (i, j) in order breaks distance ties by the lowest level index pair.
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 1;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = std::max(active[i].hi, active[j].hi) - std::min(active[i].lo, active[j].lo);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (heights) heights->push_back(best);
    auto& target = active[bi];
    target.members.insert(target.members.end(), active[bj].members.begin(), active[bj].members.end());
    std::sort(target.members.begin(), target.members.end());
    target.lo = std::min(target.lo, active[bj].lo);
    target.hi = std::max(target.hi, active[bj].hi);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    if (active.size() == stop_at) snapshot = active;
  }
  return snapshot;
}

std::size_t choose_cluster_count(std::span<const double> responses) {
  std::vector<double> distinct(responses.begin(), responses.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const std::size_t n_distinct = distinct.size();
  if (n_distinct <= 2) return n_distinct;

  std::vector<double> heights;
  agglomerate(responses, 0, &heights);
  const std::size_t n_levels = responses.size();
  // With k clusters left, n_levels - k merges are done; the last one has
  // height heights[n_levels - k - 1] and the next heights[n_levels - k].
  // k < n_distinct keeps the last merge strictly positive.
  std::size_t best_k = 2;
  double best_ratio = -1.0;
  const std::size_t k_max = std::min(n_distinct - 1, kMaxAutoClusters);
  for (std::size_t k = 2; k <= k_max; ++k) {
    const double last = heights[n_levels - k - 1];
    const double next = heights[n_levels - k];
    const double ratio = next / last;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace

LevelGrouping cluster_levels(std::span<const double> responses, ClusterCount k) {
  const std::size_t n_levels = responses.size();
  if (n_levels == 0) throw Error(ErrorCode::InvalidClusterCount, "no levels to cluster");
  if (k && (*k < 1 || *k > n_levels))
    throw Error(ErrorCode::InvalidClusterCount, "cluster count " + std::to_string(*k) + " outside [1, " +
                                                    std::to_string(n_levels) + "]");
  const std::size_t target = k ? *k : choose_cluster_count(responses);
  auto clusters = agglomerate(responses, target, nullptr);

  auto mean_of = [&](const Cluster& c) {
    double sum = 0.0;
    for (auto l : c.members) sum += responses[l];
    return sum / static_cast<double>(c.members.size());
  };
  std::stable_sort(clusters.begin(), clusters.end(),
                   [&](const Cluster& a, const Cluster& b) { return mean_of(a) < mean_of(b); });

  LevelGrouping grouping;
  grouping.n_groups = clusters.size();
  grouping.group_of.assign(n_levels, 0);
  for (std::size_t g = 0; g < clusters.size(); ++g)
    for (auto l : clusters[g].members) grouping.group_of[l] = g;
  return grouping;
}

}  // namespace safe
