#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "safe/data.hpp"

namespace safe {

/// Settings of the built-in stump booster. Defaults are the untuned
/// configuration: 100 trees, shrinkage 0.1, bag fraction 0.5, depth 1.
class GbmHyperparams {
 public:
  GbmHyperparams() = default;
  GbmHyperparams(std::size_t n_trees, double shrinkage, double bag_fraction);

  std::size_t n_trees() const { return n_trees_; }
  double shrinkage() const { return shrinkage_; }
  double bag_fraction() const { return bag_fraction_; }
  static constexpr int interaction_depth() { return 1; }

  bool operator==(const GbmHyperparams&) const = default;

 private:
  std::size_t n_trees_ = 100;
  double shrinkage_ = 0.1;
  double bag_fraction_ = 0.5;
};

struct NumericSplit {
  double threshold = 0.0;  // x <= threshold goes left
  bool operator==(const NumericSplit&) const = default;
};

struct CategoricalSplit {
  std::vector<std::string> left_levels;  // everything else goes right
  bool operator==(const CategoricalSplit&) const = default;
};

struct Stump {
  std::size_t feature = 0;
  std::variant<NumericSplit, CategoricalSplit> split;
  double left_value = 0.0;  // shrinkage already applied
  double right_value = 0.0;

  bool operator==(const Stump&) const = default;
};

/// Feature layout a model was trained on. Categorical entries keep the full
/// training level dictionary so unknown levels can be reported.
struct FeatureInfo {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> levels;

  bool operator==(const FeatureInfo&) const = default;
};

std::vector<FeatureInfo> feature_info(const Dataset& data);

class GbmModel {
 public:
  GbmModel(double init_score, std::vector<Stump> trees, GbmHyperparams hyperparams,
           std::vector<FeatureInfo> features);

  double init_score() const { return init_score_; }
  const std::vector<Stump>& trees() const { return trees_; }
  const GbmHyperparams& hyperparams() const { return hyperparams_; }
  const std::vector<FeatureInfo>& features() const { return features_; }
  std::string schema_fingerprint() const;

  /// Link-scale scores after the first `n_trees` trees (all by default).
  std::vector<double> raw_scores(const Dataset& rows, std::size_t n_trees) const;
  std::vector<double> raw_scores(const Dataset& rows) const;
  /// Probabilities sigmoid(raw score).
  std::vector<double> predict(const Dataset& rows) const;

  std::string to_json_text() const;
  static GbmModel from_json_text(const std::string& text);

  bool operator==(const GbmModel&) const = default;

 private:
  double init_score_;
  std::vector<Stump> trees_;
  GbmHyperparams hyperparams_;
  std::vector<FeatureInfo> features_;
};

GbmModel fit_gbm(const Dataset& train, const GbmHyperparams& hp, std::uint64_t seed);

struct GbmSearchRanges {
  std::size_t min_trees = 50, max_trees = 1000;
  double min_shrinkage = 0.01, max_shrinkage = 0.6;
  double min_bag_fraction = 0.2, max_bag_fraction = 0.7;
};

struct GbmSearchResult {
  GbmModel model;
  GbmHyperparams hyperparams;
  double validation_auc;
  std::size_t draw_index;
};

/// Draws `n_draws` settings uniformly from `ranges`, fits each on `train`
/// and keeps the best validation AUC (earliest draw wins ties).
GbmSearchResult random_search_gbm(const Dataset& train, const Dataset& valid,
                                  const GbmSearchRanges& ranges, std::size_t n_draws,
                                  std::uint64_t seed, std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Surrogate handles

/// Anything that maps feature rows to real scores. Implementations must be
/// safe to call from several threads at once.
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual std::vector<double> score(const Dataset& rows) const = 0;
  virtual std::string describe() const = 0;
};

class BuiltinSurrogate final : public Surrogate {
 public:
  explicit BuiltinSurrogate(GbmModel model) : model_(std::move(model)) {}
  std::vector<double> score(const Dataset& rows) const override { return model_.predict(rows); }
  std::string describe() const override;
  const GbmModel& model() const { return model_; }

 private:
  GbmModel model_;
};

/// Scores rows by running a shell command: feature CSV on stdin, one number
/// per row on stdout. One batch in flight at a time.
class ExternalSurrogate final : public Surrogate {
 public:
  explicit ExternalSurrogate(std::string command, std::filesystem::path working_directory = {});
  std::vector<double> score(const Dataset& rows) const override;
  std::string describe() const override;

  const std::string& command() const { return command_; }

 private:
  std::string command_;
  std::filesystem::path working_directory_;
  mutable std::mutex mutex_;
};

using SurrogateHandle = std::shared_ptr<const Surrogate>;

SurrogateHandle make_builtin(GbmModel model);
SurrogateHandle make_external(std::string command, std::filesystem::path working_directory = {});

inline std::vector<double> predict(const SurrogateHandle& handle, const Dataset& rows) {
  return handle->score(rows);
}

double sigmoid(double x);

}  // namespace safe
