#include "safe/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "json.hpp"
#include "safe/error.hpp"
#include "safe/random.hpp"
#include "safe/util.hpp"

namespace safe {

using nlohmann::json;

const char* to_string(ColumnKind kind) {
  return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::vector<ColumnSpec> columns, std::string target)
    : columns_(std::move(columns)), target_(std::move(target)) {
  if (columns_.empty()) throw Error(ErrorCode::InvalidArgument, "schema has no feature columns");
  if (target_.empty()) throw Error(ErrorCode::InvalidArgument, "schema has no target");
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw Error(ErrorCode::InvalidArgument, "empty column name in schema");
    if (!seen.insert(c.name).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate column '" + c.name + "' in schema");
  }
  if (seen.count(target_))
    throw Error(ErrorCode::InvalidArgument,
                "target '" + target_ + "' is also listed as a feature column");
}

Schema Schema::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("schema is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("columns") || !doc.contains("target") ||
      !doc["columns"].is_array() || !doc["target"].is_string())
    throw Error(ErrorCode::InvalidArgument, "schema needs 'columns' array and 'target' string");
  std::vector<ColumnSpec> columns;
  for (const auto& entry : doc["columns"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("kind") ||
        !entry["name"].is_string() || !entry["kind"].is_string())
      throw Error(ErrorCode::InvalidArgument, "schema column needs string 'name' and 'kind'");
    const auto kind = entry["kind"].get<std::string>();
    ColumnSpec spec{entry["name"].get<std::string>(), ColumnKind::Numeric};
    if (kind == "categorical") {
      spec.kind = ColumnKind::Categorical;
    } else if (kind != "numeric") {
      throw Error(ErrorCode::InvalidArgument, "unknown column kind '" + kind + "'");
    }
    columns.push_back(std::move(spec));
  }
  return Schema(std::move(columns), doc["target"].get<std::string>());
}

Schema Schema::from_json_file(const std::filesystem::path& path) {
  return from_json_text(read_file(path));
}

std::string Schema::to_json_text() const {
  json doc;
  doc["columns"] = json::array();
  for (const auto& c : columns_) doc["columns"].push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
  doc["target"] = target_;
  return doc.dump(2) + "\n";
}

std::optional<std::size_t> Schema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

std::string Schema::fingerprint() const { return layout_fingerprint(columns_); }

std::string layout_fingerprint(const std::vector<ColumnSpec>& columns) {
  std::uint64_t h = fnv1a64("safe-schema-v1");
  for (const auto& c : columns) {
    h = fnv1a64(c.name, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    h = fnv1a64(to_string(c.kind), h);
    h = fnv1a64(std::string_view("\x1e", 1), h);
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

std::size_t column_length(const Column& column) {
  return std::visit(
      [](const auto& c) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, NumericColumn>)
          return c.values.size();
        else
          return c.codes.size();
      },
      column);
}

ColumnKind kind_of(const Column& column) {
  return std::holds_alternative<NumericColumn>(column) ? ColumnKind::Numeric
                                                       : ColumnKind::Categorical;
}

void check_column(const ColumnSpec& spec, const Column& column, std::size_t n_rows) {
  if (kind_of(column) != spec.kind)
    throw Error(ErrorCode::SchemaMismatch, "column '" + spec.name + "' has the wrong kind");
  if (column_length(column) != n_rows)
    throw Error(ErrorCode::InvalidArgument,
                "column '" + spec.name + "' has " + std::to_string(column_length(column)) +
                    " entries, expected " + std::to_string(n_rows));
  if (const auto* num = std::get_if<NumericColumn>(&column)) {
    for (double v : num->values)
      if (!std::isfinite(v))
        throw Error(ErrorCode::InvalidArgument, "non-finite value in column '" + spec.name + "'");
    return;
  }
  const auto& cat = std::get<CategoricalColumn>(column);
  if (!cat.levels) throw Error(ErrorCode::InvalidArgument, "column '" + spec.name + "' has no levels");
  std::set<std::string> names(cat.levels->begin(), cat.levels->end());
  if (names.size() != cat.levels->size())
    throw Error(ErrorCode::InvalidArgument, "duplicate level name in column '" + spec.name + "'");
  const auto n_levels = static_cast<std::int32_t>(cat.levels->size());
  for (auto code : cat.codes)
    if (code < 0 || code >= n_levels)
      throw Error(ErrorCode::IndexOutOfRange, "level code out of range in column '" + spec.name + "'");
}

}  // namespace

Dataset::Dataset(Schema schema, std::vector<Column> columns, std::vector<std::uint8_t> target)
    : schema_(std::move(schema)), columns_(std::move(columns)), target_(std::move(target)) {
  if (columns_.size() != schema_.size())
    throw Error(ErrorCode::SchemaMismatch, "column count does not match schema");
  for (std::size_t i = 0; i < columns_.size(); ++i) check_column(schema_[i], columns_[i], target_.size());
  for (auto t : target_)
    if (t > 1) throw Error(ErrorCode::NonBinaryTarget, "target values must be 0 or 1");
}

const NumericColumn& Dataset::numeric(std::size_t i) const {
  if (const auto* c = std::get_if<NumericColumn>(&columns_.at(i))) return *c;
  throw Error(ErrorCode::InvalidArgument, "column '" + schema_[i].name + "' is not numeric");
}

const CategoricalColumn& Dataset::categorical(std::size_t i) const {
  if (const auto* c = std::get_if<CategoricalColumn>(&columns_.at(i))) return *c;
  throw Error(ErrorCode::InvalidArgument, "column '" + schema_[i].name + "' is not categorical");
}

bool Dataset::has_both_classes() const {
  bool zero = false, one = false;
  for (auto t : target_) (t ? one : zero) = true;
  return zero && one;
}

Dataset Dataset::with_column(std::size_t i, Column column) const {
  if (i >= columns_.size()) throw Error(ErrorCode::IndexOutOfRange, "column index out of range");
  auto columns = columns_;
  columns[i] = std::move(column);
  return Dataset(schema_, std::move(columns), target_);
}

bool Dataset::operator==(const Dataset& other) const {
  if (!(schema_ == other.schema_) || target_ != other.target_) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& a = columns_[i];
    const auto& b = other.columns_[i];
    if (a.index() != b.index()) return false;
    if (const auto* na = std::get_if<NumericColumn>(&a)) {
      if (na->values != std::get<NumericColumn>(b).values) return false;
    } else {
      const auto& ca = std::get<CategoricalColumn>(a);
      const auto& cb = std::get<CategoricalColumn>(b);
      if (ca.codes != cb.codes || *ca.levels != *cb.levels) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA"; }

}  // namespace

Dataset parse_csv(const std::string& text, const Schema& schema) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorCode::MissingColumn, "CSV has no header row");

  const auto header = split_cells(lines[0]);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t j = 0; j < header.size(); ++j) position.emplace(std::string(trim(header[j])), j);

  auto locate = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) throw Error(ErrorCode::MissingColumn, "CSV has no column '" + name + "'");
    return it->second;
  };
  std::vector<std::size_t> source(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) source[i] = locate(schema[i].name);
  const std::size_t target_source = locate(schema.target());

  const std::size_t n_rows = lines.size() - 1;
  std::vector<std::vector<double>> numeric(schema.size());
  std::vector<std::vector<std::int32_t>> codes(schema.size());
  std::vector<LevelDictionary> levels(schema.size());
  std::vector<std::unordered_map<std::string, std::int32_t>> level_index(schema.size());
  std::vector<std::string> raw_target;
  raw_target.reserve(n_rows);

  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t row = r + 1;
    const auto cells = split_cells(lines[r + 1]);
    if (cells.size() != header.size())
      throw ParseError(ErrorCode::ParseError, row, cells.size() > header.size() ? "*" : "",
                       "expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()) + " (cells may not contain commas)");
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const auto cell = trim(cells[source[i]]);
      const auto& spec = schema[i];
      if (is_missing(cell)) throw ParseError(ErrorCode::MissingValue, row, spec.name, "missing value");
      if (spec.kind == ColumnKind::Numeric) {
        double v = 0.0;
        if (!parse_double(cell, v))
          throw ParseError(ErrorCode::ParseError, row, spec.name,
                           "cannot parse '" + std::string(cell) + "' as a number");
        numeric[i].push_back(v);
      } else {
        std::string name(cell);
        auto [it, inserted] =
            level_index[i].emplace(name, static_cast<std::int32_t>(levels[i].size()));
        if (inserted) levels[i].push_back(std::move(name));
        codes[i].push_back(it->second);
      }
    }
    const auto cell = trim(cells[target_source]);
    if (is_missing(cell)) throw ParseError(ErrorCode::MissingValue, row, schema.target(), "missing target");
    raw_target.emplace_back(cell);
  }

  std::set<std::string> labels(raw_target.begin(), raw_target.end());
  std::string zero_label = "0", one_label = "1";
  const bool numeric_labels =
      std::all_of(labels.begin(), labels.end(), [](const std::string& l) { return l == "0" || l == "1"; });
  if (!numeric_labels) {
    if (labels.size() != 2)
      throw Error(ErrorCode::NonBinaryTarget, "target '" + schema.target() + "' has " +
                                                  std::to_string(labels.size()) +
                                                  " distinct labels, need 0/1 or exactly two");
    zero_label = *labels.begin();
    one_label = *labels.rbegin();
  }
  std::vector<std::uint8_t> target(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) target[r] = raw_target[r] == one_label ? 1 : 0;

  std::vector<Column> columns;
  columns.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].kind == ColumnKind::Numeric) {
      columns.emplace_back(NumericColumn{std::move(numeric[i])});
    } else {
      columns.emplace_back(CategoricalColumn{
          std::move(codes[i]), std::make_shared<const LevelDictionary>(std::move(levels[i]))});
    }
  }
  return Dataset(schema, std::move(columns), std::move(target));
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  return parse_csv(read_file(path), schema);
}

namespace {

void append_cell(std::string& out, const Column& column, std::size_t row) {
  if (const auto* num = std::get_if<NumericColumn>(&column))
    out += format_double(num->values[row]);
  else
    out += std::get<CategoricalColumn>(column).level_name(row);
}

std::string write_rows(const Dataset& data, bool with_target) {
  std::string out;
  const auto& schema = data.schema();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (i) out += ',';
    out += schema[i].name;
  }
  if (with_target) out += "," + schema.target();
  out += '\n';
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t i = 0; i < schema.size(); ++i) {
      if (i) out += ',';
      append_cell(out, data.column(i), r);
    }
    if (with_target) {
      out += ',';
      out += data.target()[r] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string to_csv(const Dataset& data) { return write_rows(data, true); }
std::string features_to_csv(const Dataset& data) { return write_rows(data, false); }

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  for (auto idx : indices)
    if (idx >= data.n_rows())
      throw Error(ErrorCode::IndexOutOfRange, "row index " + std::to_string(idx) + " out of range (" +
                                                  std::to_string(data.n_rows()) + " rows)");
  std::vector<Column> columns;
  columns.reserve(data.n_features());
  for (const auto& column : data.columns()) {
    if (const auto* num = std::get_if<NumericColumn>(&column)) {
      NumericColumn out;
      out.values.reserve(indices.size());
      for (auto idx : indices) out.values.push_back(num->values[idx]);
      columns.emplace_back(std::move(out));
    } else {
      const auto& cat = std::get<CategoricalColumn>(column);
      CategoricalColumn out{{}, cat.levels};
      out.codes.reserve(indices.size());
      for (auto idx : indices) out.codes.push_back(cat.codes[idx]);
      columns.emplace_back(std::move(out));
    }
  }
  std::vector<std::uint8_t> target;
  target.reserve(indices.size());
  for (auto idx : indices) target.push_back(data.target()[idx]);
  return Dataset(data.schema(), std::move(columns), std::move(target));
}

Dataset tile(const Dataset& data, std::size_t copies) {
  std::vector<std::size_t> indices;
  indices.reserve(data.n_rows() * copies);
  for (std::size_t c = 0; c < copies; ++c)
    for (std::size_t r = 0; r < data.n_rows(); ++r) indices.push_back(r);
  return subset(data, indices);
}

// ---------------------------------------------------------------------------
// Splits

void validate_split_plan(const SplitPlan& plan, std::size_t n_rows, const Dataset* data) {
  for (std::size_t s = 0; s < plan.splits.size(); ++s) {
    const auto& split = plan.splits[s];
    const std::string where = "split " + std::to_string(s);
    std::vector<char> side(n_rows, 0);
    auto mark = [&](const std::vector<std::size_t>& indices, char tag, const char* name) {
      for (auto idx : indices) {
        if (idx >= n_rows)
          throw Error(ErrorCode::IndexOutOfRange,
                      where + ": " + name + " index " + std::to_string(idx) + " out of range");
        if (side[idx] == tag)
          throw Error(ErrorCode::OverlappingSplit,
                      where + ": duplicate " + name + " index " + std::to_string(idx));
        if (side[idx] != 0)
          throw Error(ErrorCode::OverlappingSplit,
                      where + ": row " + std::to_string(idx) + " is in both train and test");
        side[idx] = tag;
      }
    };
    mark(split.train, 1, "train");
    mark(split.test, 2, "test");
    if (split.train.empty() || split.test.empty())
      throw Error(ErrorCode::DegenerateTrainPartition, where + ": empty partition");
    if (!data) continue;
    bool zero = false, one = false;
    for (auto idx : split.train) (data->target()[idx] ? one : zero) = true;
    if (!(zero && one))
      throw Error(ErrorCode::DegenerateTrainPartition, where + ": train partition has a single class");
    for (std::size_t i = 0; i < data->n_features(); ++i) {
      const auto* num = std::get_if<NumericColumn>(&data->column(i));
      if (!num) continue;
      const double first = num->values[split.train.front()];
      const bool varies = std::any_of(split.train.begin(), split.train.end(),
                                      [&](std::size_t idx) { return num->values[idx] != first; });
      if (!varies)
        throw Error(ErrorCode::DegenerateTrainPartition,
                    where + ": numeric column '" + data->schema()[i].name +
                        "' takes a single value in the train partition");
    }
  }
}

SplitPlan parse_splits(const std::string& json_text, std::size_t n_rows) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("split file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::CorruptFile, "split file must be a JSON array");
  SplitPlan plan;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("train") || !entry.contains("test"))
      throw Error(ErrorCode::CorruptFile, "each split needs 'train' and 'test' arrays");
    Split split;
    try {
      split.train = entry["train"].get<std::vector<std::size_t>>();
      split.test = entry["test"].get<std::vector<std::size_t>>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::CorruptFile, "split indices must be non-negative integers");
    }
    plan.splits.push_back(std::move(split));
  }
  validate_split_plan(plan, n_rows);
  return plan;
}

SplitPlan load_splits(const std::filesystem::path& path, std::size_t n_rows) {
  return parse_splits(read_file(path), n_rows);
}

Split stratified_split(const std::vector<std::uint8_t>& target, double train_fraction,
                       std::uint64_t seed) {
  Rng rng(seed);
  Split split;
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < target.size(); ++r)
      if (target[r] == cls) rows.push_back(r);
    if (rows.size() < 2)
      throw Error(ErrorCode::SingleClassTarget, "each class needs at least two rows to split");
    const auto order = sample_without_replacement(rng, rows.size(), rows.size());
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * rows.size()));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    for (std::size_t k = 0; k < rows.size(); ++k)
      (k < n_train ? split.train : split.test).push_back(rows[order[k]]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw Error(ErrorCode::FileNotFound, "failed writing '" + path.string() + "'");
}

}  // namespace safe
