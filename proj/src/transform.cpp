#include "safe/transform.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "safe/error.hpp"
#include "safe/util.hpp"

namespace safe {

using nlohmann::json;

namespace {
constexpr int kFormatVersion = 1;
}

std::map<std::string, std::size_t> CategoricalMerge::level_to_group() const {
  std::map<std::string, std::size_t> out;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const auto& level : groups[g]) out.emplace(level, g);
  return out;
}

const std::string& feature_name(const FeatureTransform& t) {
  return std::visit([](const auto& v) -> const std::string& { return v.feature; }, t);
}

void validate(const FeatureTransform& t) {
  if (const auto* bin = std::get_if<NumericBinning>(&t)) {
    for (std::size_t i = 0; i < bin->cutpoints.size(); ++i) {
      if (!std::isfinite(bin->cutpoints[i]))
        throw Error(ErrorCode::InvalidArgument, "non-finite cutpoint for '" + bin->feature + "'");
      if (i && !(bin->cutpoints[i - 1] < bin->cutpoints[i]))
        throw Error(ErrorCode::InvalidArgument, "cutpoints for '" + bin->feature + "' not ascending");
    }
  } else if (const auto* merge = std::get_if<CategoricalMerge>(&t)) {
    if (merge->groups.empty())
      throw Error(ErrorCode::InvalidArgument, "no level groups for '" + merge->feature + "'");
    std::set<std::string> seen;
    for (const auto& group : merge->groups) {
      if (group.empty())
        throw Error(ErrorCode::InvalidArgument, "empty level group for '" + merge->feature + "'");
      for (const auto& level : group)
        if (!seen.insert(level).second)
          throw Error(ErrorCode::InvalidArgument,
                      "level '" + level + "' appears twice for '" + merge->feature + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// TransformSet

TransformSet::TransformSet(const Schema& schema, std::vector<FeatureTransform> transforms,
                           Provenance provenance)
    : transforms_(std::move(transforms)),
      fingerprint_(schema.fingerprint()),
      provenance_(std::move(provenance)) {
  if (transforms_.size() != schema.size())
    throw Error(ErrorCode::SchemaMismatch, "need exactly one transform per feature column");
  for (std::size_t i = 0; i < transforms_.size(); ++i) {
    if (feature_name(transforms_[i]) != schema[i].name)
      throw Error(ErrorCode::SchemaMismatch, "transform " + std::to_string(i) + " is for '" +
                                                 feature_name(transforms_[i]) + "', schema has '" +
                                                 schema[i].name + "'");
    const bool numeric = schema[i].kind == ColumnKind::Numeric;
    if ((numeric && std::holds_alternative<CategoricalMerge>(transforms_[i])) ||
        (!numeric && std::holds_alternative<NumericBinning>(transforms_[i])))
      throw Error(ErrorCode::SchemaMismatch, "transform kind does not match column '" + schema[i].name + "'");
    validate(transforms_[i]);
  }
}

std::string TransformSet::to_json_text() const {
  json doc;
  doc["format"] = kFormatVersion;
  doc["schema_fingerprint"] = fingerprint_;
  doc["provenance"] = {{"surrogate", provenance_.surrogate},
                       {"penalty", provenance_.penalty},
                       {"clusters", provenance_.clusters},
                       {"grid_max", provenance_.grid_max},
                       {"sample_cap", provenance_.sample_cap},
                       {"seed", provenance_.seed}};
  doc["transforms"] = json::array();
  for (const auto& t : transforms_) {
    json entry;
    if (const auto* bin = std::get_if<NumericBinning>(&t)) {
      entry = {{"kind", "numeric"}, {"feature", bin->feature}, {"cutpoints", bin->cutpoints}};
    } else if (const auto* merge = std::get_if<CategoricalMerge>(&t)) {
      json levels = json::object();
      for (const auto& [level, group] : merge->level_to_group()) levels[level] = group;
      entry = {{"kind", "categorical"},
               {"feature", merge->feature},
               {"groups", merge->groups},
               {"level_groups", levels}};
    } else {
      const auto& dropped = std::get<DroppedFeature>(t);
      entry = {{"kind", "dropped"}, {"feature", dropped.feature}, {"reason", dropped.reason}};
    }
    doc["transforms"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

TransformSet TransformSet::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("transform file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format"))
    throw Error(ErrorCode::CorruptFile, "transform file has no 'format' key");
  if (doc["format"] != kFormatVersion)
    throw Error(ErrorCode::FormatVersionMismatch, "unsupported transform format " + doc["format"].dump());
  TransformSet set;
  try {
    set.fingerprint_ = doc.at("schema_fingerprint").get<std::string>();
    const auto& prov = doc.at("provenance");
    set.provenance_.surrogate = prov.at("surrogate").get<std::string>();
    set.provenance_.penalty = prov.at("penalty").get<std::string>();
    set.provenance_.clusters = prov.at("clusters").get<std::string>();
    set.provenance_.grid_max = prov.at("grid_max").get<std::size_t>();
    set.provenance_.sample_cap = prov.at("sample_cap").get<std::size_t>();
    set.provenance_.seed = prov.at("seed").get<std::uint64_t>();
    for (const auto& entry : doc.at("transforms")) {
      const auto kind = entry.at("kind").get<std::string>();
      const auto feature = entry.at("feature").get<std::string>();
      if (kind == "numeric") {
        set.transforms_.emplace_back(NumericBinning{feature, entry.at("cutpoints").get<std::vector<double>>()});
      } else if (kind == "categorical") {
        set.transforms_.emplace_back(CategoricalMerge{
            feature, entry.at("groups").get<std::vector<std::vector<std::string>>>()});
      } else if (kind == "dropped") {
        set.transforms_.emplace_back(DroppedFeature{feature, entry.at("reason").get<std::string>()});
      } else {
        throw Error(ErrorCode::CorruptFile, "unknown transform kind '" + kind + "'");
      }
      validate(set.transforms_.back());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed transform file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::CorruptFile, e.what());
    throw;
  }
  return set;
}

void TransformSet::save(const std::filesystem::path& path) const { write_file(path, to_json_text()); }

TransformSet TransformSet::load(const std::filesystem::path& path) { return from_json_text(read_file(path)); }

// ---------------------------------------------------------------------------
// DesignMatrix

DesignMatrix::DesignMatrix(std::size_t n_rows, std::vector<std::string> names)
    : n_rows_(n_rows), names_(std::move(names)), values_(n_rows_ * names_.size(), 0.0) {
  std::set<std::string> seen;
  for (const auto& n : names_)
    if (!seen.insert(n).second) throw Error(ErrorCode::InvalidArgument, "duplicate design column '" + n + "'");
}

DesignMatrix::DesignMatrix(std::size_t n_rows, std::vector<std::string> names, std::vector<double> values)
    : DesignMatrix(n_rows, std::move(names)) {
  if (values.size() != values_.size())
    throw Error(ErrorCode::InvalidArgument, "design values do not match its shape");
  values_ = std::move(values);
}

bool DesignMatrix::is_binary() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

DesignMatrix DesignMatrix::select_rows(std::span<const std::size_t> rows) const {
  DesignMatrix out(rows.size(), names_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n_rows_) throw Error(ErrorCode::IndexOutOfRange, "design row out of range");
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(rows[i] * n_cols()), n_cols(),
                out.values_.begin() + static_cast<std::ptrdiff_t>(i * n_cols()));
  }
  return out;
}

namespace {

std::string quote_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_quoted(std::string_view line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back() += c;
    }
  }
  if (quoted) throw Error(ErrorCode::CorruptFile, "unterminated quote in design CSV");
  return cells;
}

}  // namespace

std::string DesignMatrix::to_csv(const std::vector<std::uint8_t>* target,
                                 const std::string& target_name) const {
  std::string out;
  for (std::size_t c = 0; c < n_cols(); ++c) {
    if (c) out += ',';
    out += quote_cell(names_[c]);
  }
  if (target) out += (n_cols() ? "," : "") + quote_cell(target_name);
  out += '\n';
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (std::size_t c = 0; c < n_cols(); ++c) {
      if (c) out += ',';
      out += format_double((*this)(r, c));
    }
    if (target) {
      if (n_cols()) out += ',';
      out += (*target)[r] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

DesignMatrix DesignMatrix::from_csv(const std::string& text, const std::string& target_name,
                                    std::vector<std::uint8_t>& target) {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t end = std::min(rest.find('\n'), rest.size());
    std::string_view line = rest.substr(0, end);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    rest.remove_prefix(std::min(end + 1, rest.size()));
  }
  if (lines.empty()) throw Error(ErrorCode::CorruptFile, "design CSV is empty");
  const auto header = split_quoted(lines[0]);
  auto target_it = std::find(header.begin(), header.end(), target_name);
  if (target_it == header.end())
    throw Error(ErrorCode::MissingColumn, "design CSV has no target column '" + target_name + "'");
  const auto target_col = static_cast<std::size_t>(target_it - header.begin());
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != target_col) names.push_back(header[c]);

  const std::size_t n_rows = lines.size() - 1;
  std::vector<double> values;
  values.reserve(n_rows * names.size());
  target.assign(n_rows, 0);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto cells = split_quoted(lines[r + 1]);
    if (cells.size() != header.size())
      throw ParseError(ErrorCode::ParseError, r + 1, "", "wrong number of cells");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        throw ParseError(ErrorCode::ParseError, r + 1, header[c], "not a number: '" + cells[c] + "'");
      if (c == target_col) {
        if (v != 0.0 && v != 1.0) throw Error(ErrorCode::NonBinaryTarget, "design target must be 0/1");
        target[r] = static_cast<std::uint8_t>(v);
      } else {
        values.push_back(v);
      }
    }
  }
  return DesignMatrix(n_rows, std::move(names), std::move(values));
}

// ---------------------------------------------------------------------------
// Labels and application

std::vector<std::string> interval_labels(std::span<const double> cutpoints) {
  std::vector<std::string> labels;
  std::string lower = "-Inf";
  for (double c : cutpoints) {
    const std::string upper = format_double(c);
    labels.push_back("(" + lower + "," + upper + "]");
    lower = upper;
  }
  labels.push_back("(" + lower + ",Inf)");
  return labels;
}

std::string group_label(std::vector<std::string> members) {
  std::sort(members.begin(), members.end());
  std::string out = "{";
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) out += ',';
    out += members[i];
  }
  return out + "}";
}

std::size_t design_width(const TransformSet& set) {
  std::size_t width = 0;
  for (const auto& t : set.transforms()) {
    if (const auto* bin = std::get_if<NumericBinning>(&t))
      width += bin->cutpoints.size();
    else if (const auto* merge = std::get_if<CategoricalMerge>(&t))
      width += merge->groups.size() - 1;
  }
  return width;
}

DesignMatrix apply(const TransformSet& set, const Dataset& data, UnseenPolicy unseen) {
  if (data.schema().fingerprint() != set.schema_fingerprint())
    throw Error(ErrorCode::SchemaMismatch, "data schema does not match the transform set");

  std::vector<std::string> names;
  for (const auto& t : set.transforms()) {
    if (const auto* bin = std::get_if<NumericBinning>(&t)) {
      const auto labels = interval_labels(bin->cutpoints);
      for (std::size_t b = 1; b < labels.size(); ++b) names.push_back(bin->feature + "_" + labels[b]);
    } else if (const auto* merge = std::get_if<CategoricalMerge>(&t)) {
      for (std::size_t g = 1; g < merge->groups.size(); ++g)
        names.push_back(merge->feature + "_" + group_label(merge->groups[g]));
    }
  }

  const std::size_t n = data.n_rows();
  DesignMatrix design(n, std::move(names));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < set.transforms().size(); ++i) {
    const auto& t = set.transforms()[i];
    if (const auto* bin = std::get_if<NumericBinning>(&t)) {
      const auto& values = data.numeric(i).values;
      const auto& cuts = bin->cutpoints;
      for (std::size_t r = 0; r < n; ++r) {
        // bin index = number of cutpoints strictly below the value
        const auto b = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), values[r]) - cuts.begin());
        if (b > 0) design(r, offset + b - 1) = 1.0;
      }
      offset += cuts.size();
    } else if (const auto* merge = std::get_if<CategoricalMerge>(&t)) {
      const auto& column = data.categorical(i);
      const auto lookup = merge->level_to_group();
      // level code -> group id; -1 unseen
      std::vector<long> group_of(column.levels->size(), -1);
      for (std::size_t l = 0; l < column.levels->size(); ++l) {
        auto it = lookup.find((*column.levels)[l]);
        if (it != lookup.end()) group_of[l] = static_cast<long>(it->second);
      }
      for (std::size_t r = 0; r < n; ++r) {
        const long g = group_of[column.codes[r]];
        if (g < 0) {
          if (unseen == UnseenPolicy::Error)
            throw Error(ErrorCode::UnknownLevel, "column '" + merge->feature + "' has unseen level '" +
                                                     column.level_name(r) + "'");
          continue;
        }
        if (g > 0) design(r, offset + static_cast<std::size_t>(g) - 1) = 1.0;
      }
      offset += merge->groups.size() - 1;
    }
  }
  return design;
}

}  // namespace safe
