#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "safe/data.hpp"

namespace safe {

/// Interval bins (-Inf,c1], (c1,c2], ..., (cr,Inf) over ascending cutpoints.
struct NumericBinning {
  std::string feature;
  std::vector<double> cutpoints;
  bool operator==(const NumericBinning&) const = default;
};

/// Levels merged into groups; group 0 is the reference (lowest response).
struct CategoricalMerge {
  std::string feature;
  std::vector<std::vector<std::string>> groups;  // group id -> member levels

  std::map<std::string, std::size_t> level_to_group() const;
  bool operator==(const CategoricalMerge&) const = default;
};

struct DroppedFeature {
  std::string feature;
  std::string reason;
  bool operator==(const DroppedFeature&) const = default;
};

using FeatureTransform = std::variant<NumericBinning, CategoricalMerge, DroppedFeature>;

const std::string& feature_name(const FeatureTransform& t);
/// Throws InvalidArgument when a transform breaks its invariants.
void validate(const FeatureTransform& t);

struct Provenance {
  std::string surrogate;
  std::string penalty;
  std::string clusters;
  std::size_t grid_max = 0;
  std::size_t sample_cap = 0;
  std::uint64_t seed = 0;
  bool operator==(const Provenance&) const = default;
};

class TransformSet {
 public:
  TransformSet(const Schema& schema, std::vector<FeatureTransform> transforms, Provenance provenance);

  const std::vector<FeatureTransform>& transforms() const { return transforms_; }
  const std::string& schema_fingerprint() const { return fingerprint_; }
  const Provenance& provenance() const { return provenance_; }

  std::string to_json_text() const;
  static TransformSet from_json_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static TransformSet load(const std::filesystem::path& path);

  bool operator==(const TransformSet&) const = default;

 private:
  TransformSet() = default;

  std::vector<FeatureTransform> transforms_;
  std::string fingerprint_;
  Provenance provenance_;
};

/// Dense row-major design matrix with named columns.
class DesignMatrix {
 public:
  DesignMatrix(std::size_t n_rows, std::vector<std::string> names);
  DesignMatrix(std::size_t n_rows, std::vector<std::string> names, std::vector<double> values);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * names_.size() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * names_.size() + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * names_.size(), names_.size()};
  }
  const std::vector<double>& values() const { return values_; }
  bool is_binary() const;

  DesignMatrix select_rows(std::span<const std::size_t> rows) const;

  /// Header line of names (quoted when they contain commas or quotes), then
  /// one line per row; an optional trailing target column.
  std::string to_csv(const std::vector<std::uint8_t>* target = nullptr,
                     const std::string& target_name = "") const;
  /// Inverse of to_csv: the column called `target_name` becomes the target.
  static DesignMatrix from_csv(const std::string& text, const std::string& target_name,
                               std::vector<std::uint8_t>& target);

  bool operator==(const DesignMatrix&) const = default;

 private:
  std::size_t n_rows_;
  std::vector<std::string> names_;
  std::vector<double> values_;
};

/// Labels of all r+1 bins: "(-Inf,c1]", "(c1,c2]", ..., "(cr,Inf)".
std::vector<std::string> interval_labels(std::span<const double> cutpoints);
/// "{a,b}" with members sorted lexicographically.
std::string group_label(std::vector<std::string> members);

enum class UnseenPolicy { Error, Reference };

/// Binary indicators for every non-reference bin/group, in transform order.
DesignMatrix apply(const TransformSet& set, const Dataset& data,
                   UnseenPolicy unseen = UnseenPolicy::Error);

/// Number of design columns `apply` emits.
std::size_t design_width(const TransformSet& set);

}  // namespace safe
