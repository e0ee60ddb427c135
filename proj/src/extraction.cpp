#include "safe/extraction.hpp"

#include <algorithm>
#include <cmath>

#include "safe/error.hpp"
#include "safe/random.hpp"
#include "safe/util.hpp"

namespace safe {

namespace {

// Upper bound on rows per surrogate call when stacking grid points.
constexpr std::size_t kRowsPerBatch = 1 << 18;

std::size_t parse_count(const std::string& text) {
  double v = 0.0;
  if (!parse_double(text, v) || v < 1 || v != std::floor(v))
    throw Error(ErrorCode::InvalidClusterCount, "cluster count must be a positive integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

ClusterCount parse_cluster_value(const std::string& text) {
  if (text == "auto") return std::nullopt;
  return parse_count(text);
}

std::string cluster_value_string(const ClusterCount& k) { return k ? std::to_string(*k) : "auto"; }

}  // namespace

ClusterCount ExtractionOptions::clusters_for(const std::string& feature) const {
  auto it = per_column.find(feature);
  return it != per_column.end() ? it->second : clusters;
}

void ExtractionOptions::parse_clusters(const std::string& text) {
  per_column.clear();
  clusters = std::nullopt;
  if (text.find('=') == std::string::npos) {
    clusters = parse_cluster_value(text);
    return;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::InvalidArgument, "bad cluster spec item '" + item + "'");
    const std::string name = item.substr(0, eq);
    const auto value = parse_cluster_value(item.substr(eq + 1));
    if (name == "*")
      clusters = value;
    else
      per_column[name] = value;
    start = end + 1;
  }
}

std::string ExtractionOptions::clusters_to_string() const {
  if (per_column.empty()) return cluster_value_string(clusters);
  std::string out = "*=" + cluster_value_string(clusters);
  for (const auto& [name, k] : per_column) out += "," + name + "=" + cluster_value_string(k);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> make_grid(std::span<const double> column, std::size_t max_points) {
  if (max_points < 2) throw Error(ErrorCode::InvalidArgument, "grid needs at least 2 points");
  if (column.empty()) throw Error(ErrorCode::InvalidArgument, "grid of an empty column");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= max_points) return distinct;

  std::vector<double> grid;
  grid.reserve(max_points);
  const double last = static_cast<double>(sorted.size() - 1);
  for (std::size_t k = 0; k < max_points; ++k) {
    const double h = last * static_cast<double>(k) / static_cast<double>(max_points - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double q = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    if (grid.empty() || q > grid.back()) grid.push_back(q);
  }
  return grid;
}

Dataset background_sample(const Dataset& data, std::size_t cap, std::uint64_t seed) {
  if (cap == 0) throw Error(ErrorCode::InvalidArgument, "sample cap must be positive");
  if (data.n_rows() <= cap) return data;
  Rng rng(derive_seed(seed, streams::kBackground));
  auto rows = sample_without_replacement(rng, data.n_rows(), cap);
  std::sort(rows.begin(), rows.end());
  return subset(data, rows);
}

namespace {

// Scores the background once per candidate value of `feature` and returns
// the per-value averages. `make_column` builds the overriding column for a
// block of values.
template <class MakeColumn>
std::vector<double> averaged_responses(const SurrogateHandle& surrogate, const Dataset& background,
                                       std::size_t feature, std::size_t n_values, MakeColumn make_column) {
  const std::size_t nb = background.n_rows();
  if (nb == 0) throw Error(ErrorCode::InvalidArgument, "empty background data");
  const std::size_t per_batch = std::max<std::size_t>(1, kRowsPerBatch / nb);
  std::vector<double> out(n_values, 0.0);
  for (std::size_t first = 0; first < n_values; first += per_batch) {
    const std::size_t count = std::min(per_batch, n_values - first);
    const Dataset stacked = tile(background, count).with_column(feature, make_column(first, count, nb));
    const auto scores = surrogate->score(stacked);
    if (scores.size() != stacked.n_rows())
      throw Error(ErrorCode::ExternalProtocolError, "surrogate returned the wrong number of scores");
    for (std::size_t b = 0; b < count; ++b) {
      double sum = 0.0;
      for (std::size_t r = 0; r < nb; ++r) {
        const double s = scores[b * nb + r];
        if (!std::isfinite(s)) throw Error(ErrorCode::ExternalProtocolError, "surrogate returned a non-finite score");
        sum += s;
      }
      out[first + b] = sum / static_cast<double>(nb);
    }
  }
  return out;
}

}  // namespace

PdpProfile pdp(const SurrogateHandle& surrogate, const Dataset& background, std::size_t feature,
               std::span<const double> grid) {
  if (feature >= background.n_features() || background.schema()[feature].kind != ColumnKind::Numeric)
    throw Error(ErrorCode::InvalidArgument, "pdp needs a numeric feature");
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k - 1] < grid[k])) throw Error(ErrorCode::InvalidArgument, "grid must be strictly ascending");

  PdpProfile profile;
  profile.feature = feature;
  profile.grid.assign(grid.begin(), grid.end());
  profile.values = averaged_responses(
      surrogate, background, feature, grid.size(), [&](std::size_t first, std::size_t count, std::size_t nb) {
        NumericColumn column;
        column.values.reserve(count * nb);
        for (std::size_t b = 0; b < count; ++b) column.values.insert(column.values.end(), nb, grid[first + b]);
        return Column(std::move(column));
      });
  return profile;
}

LevelResponse level_responses(const SurrogateHandle& surrogate, const Dataset& background,
                              std::size_t feature) {
  if (feature >= background.n_features() || background.schema()[feature].kind != ColumnKind::Categorical)
    throw Error(ErrorCode::InvalidArgument, "level responses need a categorical feature");
  const auto& levels = background.categorical(feature).levels;
  if (levels->empty()) throw Error(ErrorCode::InvalidArgument, "categorical feature has no levels");

  LevelResponse result;
  result.feature = feature;
  result.responses = averaged_responses(
      surrogate, background, feature, levels->size(), [&](std::size_t first, std::size_t count, std::size_t nb) {
        CategoricalColumn column{{}, levels};
        column.codes.reserve(count * nb);
        for (std::size_t b = 0; b < count; ++b)
          column.codes.insert(column.codes.end(), nb, static_cast<std::int32_t>(first + b));
        return Column(std::move(column));
      });
  return result;
}

// ---------------------------------------------------------------------------

FeatureExtraction extract_feature(const SurrogateHandle& surrogate, const Dataset& data,
                                  const Dataset& background, std::size_t feature,
                                  const ExtractionOptions& opts) {
  if (feature >= data.n_features()) throw Error(ErrorCode::IndexOutOfRange, "feature index out of range");
  const auto& name = data.schema()[feature].name;
  FeatureExtraction result{DroppedFeature{name, ""}, std::nullopt, std::nullopt, std::nullopt};

  if (data.schema()[feature].kind == ColumnKind::Numeric) {
    const auto& values = data.numeric(feature).values;
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "cannot extract from zero rows");
    std::vector<double> distinct(values.begin(), values.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() == 1) {
      result.transform = DroppedFeature{name, "single distinct value"};
      return result;
    }
    if (distinct.size() == 2) {
      result.transform = NumericBinning{name, {0.5 * (distinct[0] + distinct[1])}};
      return result;
    }
    const auto grid = make_grid(values, opts.grid_max);
    result.profile = pdp(surrogate, background, feature, grid);
    result.segmentation = detect_changepoints(result.profile->values, opts.penalty);
    auto cuts = segmentation_to_cutpoints(grid, *result.segmentation);
    if (cuts.empty())
      result.transform = DroppedFeature{name, "no changepoints in partial dependence profile"};
    else
      result.transform = NumericBinning{name, std::move(cuts)};
    return result;
  }

  const auto& levels = *data.categorical(feature).levels;
  result.levels = level_responses(surrogate, background, feature);
  const auto grouping = cluster_levels(result.levels->responses, opts.clusters_for(name));
  if (grouping.n_groups < 2) {
    result.transform = DroppedFeature{name, "all levels merged into one group"};
    return result;
  }
  CategoricalMerge merge{name, std::vector<std::vector<std::string>>(grouping.n_groups)};
  for (std::size_t l = 0; l < levels.size(); ++l) merge.groups[grouping.group_of[l]].push_back(levels[l]);
  result.transform = std::move(merge);
  return result;
}

FeatureTransform extract_transform(const SurrogateHandle& surrogate, const Dataset& data,
                                   std::size_t feature, const ExtractionOptions& opts) {
  const Dataset background = background_sample(data, opts.sample_cap, opts.seed);
  return extract_feature(surrogate, data, background, feature, opts).transform;
}

std::vector<FeatureExtraction> extract_all_detailed(const SurrogateHandle& surrogate,
                                                    const Dataset& data,
                                                    const ExtractionOptions& opts) {
  const Dataset background = background_sample(data, opts.sample_cap, opts.seed);
  std::vector<std::optional<FeatureExtraction>> slots(data.n_features());
  parallel_for(data.n_features(), opts.jobs, [&](std::size_t i) {
    slots[i] = extract_feature(surrogate, data, background, i, opts);
  });
  std::vector<FeatureExtraction> out;
  out.reserve(slots.size());
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

TransformSet extract_all(const SurrogateHandle& surrogate, const Dataset& data,
                         const ExtractionOptions& opts) {
  auto detailed = extract_all_detailed(surrogate, data, opts);
  std::vector<FeatureTransform> transforms;
  transforms.reserve(detailed.size());
  for (auto& d : detailed) transforms.push_back(std::move(d.transform));
  Provenance provenance{surrogate->describe(),  opts.penalty.to_string(), opts.clusters_to_string(),
                        opts.grid_max,          opts.sample_cap,          opts.seed};
  return TransformSet(data.schema(), std::move(transforms), std::move(provenance));
}

}  // namespace safe
