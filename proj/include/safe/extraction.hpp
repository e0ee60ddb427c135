#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safe/data.hpp"
#include "safe/surrogate.hpp"
#include "safe/transform.hpp"

namespace safe {

struct PdpProfile {
  std::size_t feature = 0;
  std::vector<double> grid;    // strictly ascending
  std::vector<double> values;  // averaged surrogate response per grid point
};

struct LevelResponse {
  std::size_t feature = 0;
  std::vector<double> responses;  // indexed by level code
};

/// Changepoints as zero-based grid indices, each the last index of a segment.
struct Segmentation {
  std::vector<std::size_t> changepoints;
  bool operator==(const Segmentation&) const = default;
};

// ---------------------------------------------------------------------------
// Changepoint detection

struct PenaltySpec {
  enum class Mode { Mbic, Constant };
  Mode mode = Mode::Mbic;
  double lambda = 0.0;  // per changepoint, Constant mode only
  /// Noise scale override. When unset it is estimated from the series.
  std::optional<double> sigma;

  static PenaltySpec mbic() { return {}; }
  static PenaltySpec constant(double lambda) { return {Mode::Constant, lambda, std::nullopt}; }

  /// "mbic" or "const:<float>".
  static PenaltySpec parse(const std::string& text);
  std::string to_string() const;
};

/// Robust noise scale: median |first difference| / (0.6745 * sqrt 2).
/// Falls back to the root-mean-square difference / sqrt 2 when more than
/// half of the differences are exactly zero (piecewise-constant profiles).
double estimate_sigma(std::span<const double> values);

/// Penalized cost of a segmentation of `values` under `penalty` with noise
/// scale `sigma`:
///   sum_i RSS_i / (2 sigma^2) + (3/2) k log m + (1/2) sum_i log(n_i / m)   (MBIC)
///   sum_i RSS_i / (2 sigma^2) + lambda k                                   (Constant)
/// with k changepoints, m = values.size() and n_i the segment lengths.
double segmentation_cost(std::span<const double> values, const Segmentation& seg,
                         const PenaltySpec& penalty, double sigma);

/// Exact minimizer of segmentation_cost by optimal partitioning, O(m^2).
/// Constant series and series with zero noise scale have no changepoints.
Segmentation detect_changepoints(std::span<const double> values, const PenaltySpec& penalty);

std::vector<double> segmentation_to_cutpoints(std::span<const double> grid, const Segmentation& seg);

// ---------------------------------------------------------------------------
// Profiles

/// Sorted distinct values when there are at most max_points of them,
/// otherwise the distinct type-7 empirical quantiles at k/(max_points-1).
std::vector<double> make_grid(std::span<const double> column, std::size_t max_points);

/// Rows used as the averaging background: all rows when n <= cap, else a
/// seeded uniform sample of cap rows (kept in original order).
Dataset background_sample(const Dataset& data, std::size_t cap, std::uint64_t seed);

PdpProfile pdp(const SurrogateHandle& surrogate, const Dataset& background, std::size_t feature,
               std::span<const double> grid);

LevelResponse level_responses(const SurrogateHandle& surrogate, const Dataset& background,
                              std::size_t feature);

// ---------------------------------------------------------------------------
// Level clustering

/// Explicit group count, or nullopt for the dendrogram-gap rule.
using ClusterCount = std::optional<std::size_t>;

struct LevelGrouping {
  std::vector<std::size_t> group_of;  // level code -> group id
  std::size_t n_groups = 0;
};

/// Complete-linkage agglomeration of 1-D responses cut to k groups; group ids
/// ordered by ascending mean response.
LevelGrouping cluster_levels(std::span<const double> responses, ClusterCount k);

// ---------------------------------------------------------------------------
// Whole-feature extraction

struct ExtractionOptions {
  PenaltySpec penalty;
  ClusterCount clusters;                          // default for all categoricals
  std::map<std::string, ClusterCount> per_column; // overrides by feature name
  std::size_t grid_max = 100;
  std::size_t sample_cap = 10000;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  ClusterCount clusters_for(const std::string& feature) const;
  /// Parses "auto", "<int>" or "name=k,name2=auto,*=k".
  void parse_clusters(const std::string& text);
  std::string clusters_to_string() const;
};

/// Transform plus the intermediate profile that produced it.
struct FeatureExtraction {
  FeatureTransform transform;
  std::optional<PdpProfile> profile;
  std::optional<Segmentation> segmentation;
  std::optional<LevelResponse> levels;
};

FeatureExtraction extract_feature(const SurrogateHandle& surrogate, const Dataset& data,
                                  const Dataset& background, std::size_t feature,
                                  const ExtractionOptions& opts);

FeatureTransform extract_transform(const SurrogateHandle& surrogate, const Dataset& data,
                                   std::size_t feature, const ExtractionOptions& opts);

std::vector<FeatureExtraction> extract_all_detailed(const SurrogateHandle& surrogate,
                                                    const Dataset& data,
                                                    const ExtractionOptions& opts);

TransformSet extract_all(const SurrogateHandle& surrogate, const Dataset& data,
                         const ExtractionOptions& opts);

}  // namespace safe
