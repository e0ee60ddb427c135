#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace safe {

enum class ColumnKind { Numeric, Categorical };

const char* to_string(ColumnKind kind);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;

  bool operator==(const ColumnSpec&) const = default;
};

/// Ordered feature columns plus the name of the binary target column.
class Schema {
 public:
  Schema(std::vector<ColumnSpec> columns, std::string target);

  static Schema from_json_file(const std::filesystem::path& path);
  static Schema from_json_text(const std::string& text);
  std::string to_json_text() const;

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const std::string& target() const { return target_; }
  std::size_t size() const { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
  std::optional<std::size_t> index_of(const std::string& name) const;

  /// Digest of feature names and kinds, in order. Models and transform sets
  /// record it and refuse data whose feature layout differs.
  std::string fingerprint() const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
  std::string target_;
};

/// Digest of an ordered feature layout (names and kinds).
std::string layout_fingerprint(const std::vector<ColumnSpec>& columns);

using LevelDictionary = std::vector<std::string>;

struct NumericColumn {
  std::vector<double> values;
};

struct CategoricalColumn {
  std::vector<std::int32_t> codes;
  /// Shared so that subsets of one dataset keep identical encodings.
  std::shared_ptr<const LevelDictionary> levels;

  const std::string& level_name(std::size_t row) const { return (*levels)[codes[row]]; }
};

using Column = std::variant<NumericColumn, CategoricalColumn>;

class Dataset {
 public:
  /// Validates column lengths, finiteness, level codes and the target.
  Dataset(Schema schema, std::vector<Column> columns, std::vector<std::uint8_t> target);

  const Schema& schema() const { return schema_; }
  std::size_t n_rows() const { return target_.size(); }
  std::size_t n_features() const { return columns_.size(); }

  const Column& column(std::size_t i) const { return columns_[i]; }
  const std::vector<Column>& columns() const { return columns_; }
  const NumericColumn& numeric(std::size_t i) const;
  const CategoricalColumn& categorical(std::size_t i) const;
  const std::vector<std::uint8_t>& target() const { return target_; }

  bool has_both_classes() const;

  /// Same dataset with column i replaced; the replacement must have the same
  /// kind and length.
  Dataset with_column(std::size_t i, Column column) const;

  bool operator==(const Dataset& other) const;

 private:
  Schema schema_;
  std::vector<Column> columns_;
  std::vector<std::uint8_t> target_;
};

Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
Dataset parse_csv(const std::string& text, const Schema& schema);

/// Header is schema feature order followed by the target column. Target is
/// written as 0/1.
std::string to_csv(const Dataset& data);
/// Feature columns only, as sent to external surrogates.
std::string features_to_csv(const Dataset& data);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Row-repeat: `copies` back-to-back copies of data.
Dataset tile(const Dataset& data, std::size_t copies);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct SplitPlan {
  std::vector<Split> splits;
};

SplitPlan parse_splits(const std::string& json_text, std::size_t n_rows);
SplitPlan load_splits(const std::filesystem::path& path, std::size_t n_rows);

/// Checks the disjointness/range invariants; with `data` also checks that
/// each train partition has both classes and every numeric feature takes at
/// least two distinct values.
void validate_split_plan(const SplitPlan& plan, std::size_t n_rows,
                         const Dataset* data = nullptr);

/// Stratified random split used when no split file is given; keeps at
/// least one row of each class on both sides.
Split stratified_split(const std::vector<std::uint8_t>& target, double train_fraction,
                       std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace safe
