#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safe/data.hpp"
#include "safe/extraction.hpp"
#include "safe/glassbox.hpp"
#include "safe/metrics.hpp"
#include "safe/surrogate.hpp"

namespace safe {

enum class ModelLabel { Vanilla = 0, Surrogate = 1, Refined = 2 };
inline constexpr std::size_t kModelCount = 3;
const char* to_string(ModelLabel label);

using AucTriplet = std::array<double, kModelCount>;

struct RankPoints {
  AucTriplet points{};       // averaged over splits, sums to 3
  AucTriplet barycentric{};  // points / 3
};

/// 2/1/0 points per split by descending AUC; tied models share the mean of
/// the points their positions would get.
RankPoints rank_points(std::span<const AucTriplet> splits);

struct SurrogateConfig {
  enum class Kind { GbmDefault, GbmTuned, External };
  Kind kind = Kind::GbmDefault;
  std::size_t n_draws = 0;  // GbmTuned
  std::string command;      // External
  GbmHyperparams hyperparams;  // GbmDefault

  /// "gbm-default", "gbm-tuned:<n_draws>" or "external:<command>".
  static SurrogateConfig parse(const std::string& text);
  std::string to_string() const;
};

struct BenchmarkConfig {
  SurrogateConfig surrogate;
  GbmSearchRanges search_ranges;
  ExtractionOptions extraction;
  LogisticOptions logistic;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string label = "dataset";
  /// Receives warnings about failed splits; stderr when empty.
  std::function<void(const std::string&)> warn;
};

struct SplitResult {
  std::size_t index = 0;
  bool failed = false;
  std::string error;
  AucTriplet auc{};
  std::array<std::optional<std::size_t>, kModelCount> param_count{};
  std::optional<GbmHyperparams> tuned;
  std::optional<TransformSet> transforms;
  std::optional<LogisticModel> refined;
};

struct ModelSummary {
  double mean_auc = 0.0;
  double sd_auc = 0.0;
  std::optional<double> mean_param_count;
};

struct BenchmarkResult {
  std::string label;
  std::vector<SplitResult> splits;
  std::array<ModelSummary, kModelCount> summary{};
  RankPoints ranks;
  WilcoxonResult surrogate_vs_refined{};
  WilcoxonResult vanilla_vs_refined{};

  std::size_t n_succeeded() const;
};

/// One split of the protocol: vanilla logistic on raw features, surrogate,
/// extraction on train, refined logistic; every model scored on test.
SplitResult run_split(const Dataset& data, const Split& split, std::size_t index, const BenchmarkConfig& config,
                      std::size_t inner_jobs = 1);

/// Runs every split (failed ones are reported and left out of the
/// aggregates). Throws InvalidArgument when no split succeeds.
BenchmarkResult run_benchmark(const Dataset& data, const SplitPlan& plan, const BenchmarkConfig& config);

/// dataset, model, mean_auc, sd_auc, mean_param_count.
std::string report_tsv(std::span<const BenchmarkResult> results);
/// dataset, model, points, barycentric.
std::string barycentric_tsv(std::span<const BenchmarkResult> results);
/// dataset, model, param_count, auc (one row per model; vanilla/surrogate -> refined arrows).
std::string tradeoff_tsv(std::span<const BenchmarkResult> results);
/// dataset, split, status, per-model AUC and parameter counts.
std::string splits_tsv(std::span<const BenchmarkResult> results);
/// dataset, comparison, statistic, p_value, exact.
std::string tests_tsv(std::span<const BenchmarkResult> results);

}  // namespace safe
