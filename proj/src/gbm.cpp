#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "safe/error.hpp"
#include "safe/metrics.hpp"
#include "safe/random.hpp"
#include "safe/surrogate.hpp"
#include "safe/util.hpp"

namespace safe {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr double kLeafClamp = 4.0;

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GbmHyperparams::GbmHyperparams(std::size_t n_trees, double shrinkage, double bag_fraction)
    : n_trees_(n_trees), shrinkage_(shrinkage), bag_fraction_(bag_fraction) {
  if (n_trees_ < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be at least 1");
  if (!(shrinkage_ > 0.0 && shrinkage_ <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "shrinkage must lie in (0, 1]");
  if (!(bag_fraction_ > 0.0 && bag_fraction_ <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "bag_fraction must lie in (0, 1]");
}

std::vector<FeatureInfo> feature_info(const Dataset& data) {
  std::vector<FeatureInfo> out;
  for (std::size_t i = 0; i < data.n_features(); ++i) {
    FeatureInfo info{data.schema()[i].name, data.schema()[i].kind, {}};
    if (info.kind == ColumnKind::Categorical) info.levels = *data.categorical(i).levels;
    out.push_back(std::move(info));
  }
  return out;
}

namespace {

std::vector<ColumnSpec> layout_of(const std::vector<FeatureInfo>& features) {
  std::vector<ColumnSpec> specs;
  for (const auto& f : features) specs.push_back({f.name, f.kind});
  return specs;
}

void check_stump(const Stump& stump, const std::vector<FeatureInfo>& features) {
  if (stump.feature >= features.size())
    throw Error(ErrorCode::CorruptFile, "stump refers to a missing feature");
  if (!std::isfinite(stump.left_value) || !std::isfinite(stump.right_value))
    throw Error(ErrorCode::CorruptFile, "stump leaf values must be finite");
  const auto& info = features[stump.feature];
  if (const auto* num = std::get_if<NumericSplit>(&stump.split)) {
    if (info.kind != ColumnKind::Numeric || !std::isfinite(num->threshold))
      throw Error(ErrorCode::CorruptFile, "bad numeric stump on '" + info.name + "'");
    return;
  }
  const auto& cat = std::get<CategoricalSplit>(stump.split);
  if (info.kind != ColumnKind::Categorical)
    throw Error(ErrorCode::CorruptFile, "categorical stump on numeric feature '" + info.name + "'");
  std::set<std::string> known(info.levels.begin(), info.levels.end());
  for (const auto& level : cat.left_levels)
    if (!known.count(level))
      throw Error(ErrorCode::CorruptFile, "stump level '" + level + "' not in training levels");
  // Leaves with distinct values must actually split the levels. Stumps with
  // equal leaves (no usable split in their bag) are exempt.
  if (stump.left_value != stump.right_value &&
      (cat.left_levels.empty() || cat.left_levels.size() >= info.levels.size()))
    throw Error(ErrorCode::CorruptFile, "categorical stump must send a strict subset of levels left");
}

}  // namespace

GbmModel::GbmModel(double init_score, std::vector<Stump> trees, GbmHyperparams hyperparams,
                   std::vector<FeatureInfo> features)
    : init_score_(init_score),
      trees_(std::move(trees)),
      hyperparams_(hyperparams),
      features_(std::move(features)) {
  if (!std::isfinite(init_score_)) throw Error(ErrorCode::InvalidArgument, "init_score must be finite");
  for (const auto& stump : trees_) check_stump(stump, features_);
}

std::string GbmModel::schema_fingerprint() const { return layout_fingerprint(layout_of(features_)); }

std::vector<double> GbmModel::raw_scores(const Dataset& rows) const {
  return raw_scores(rows, trees_.size());
}

std::vector<double> GbmModel::raw_scores(const Dataset& rows, std::size_t n_trees) const {
  if (rows.schema().fingerprint() != schema_fingerprint())
    throw Error(ErrorCode::SchemaMismatch, "rows do not match the model's feature layout");
  n_trees = std::min(n_trees, trees_.size());
  const std::size_t n = rows.n_rows();

  // Per categorical feature: dataset level code -> model level index (-1 unknown).
  std::vector<std::vector<int>> level_map(features_.size());
  for (std::size_t f = 0; f < features_.size(); ++f) {
    if (features_[f].kind != ColumnKind::Categorical) continue;
    const auto& column = rows.categorical(f);
    std::unordered_map<std::string, int> model_index;
    for (std::size_t l = 0; l < features_[f].levels.size(); ++l)
      model_index.emplace(features_[f].levels[l], static_cast<int>(l));
    auto& map = level_map[f];
    map.assign(column.levels->size(), -1);
    for (std::size_t l = 0; l < column.levels->size(); ++l) {
      auto it = model_index.find((*column.levels)[l]);
      if (it != model_index.end()) map[l] = it->second;
    }
    for (auto code : column.codes)
      if (map[code] < 0)
        throw Error(ErrorCode::UnknownLevel, "column '" + features_[f].name + "' level '" +
                                                 (*column.levels)[code] + "' unknown to the model");
  }

  std::vector<double> out(n, init_score_);
  std::vector<char> goes_left;
  for (std::size_t t = 0; t < n_trees; ++t) {
    const auto& stump = trees_[t];
    if (const auto* num = std::get_if<NumericSplit>(&stump.split)) {
      const auto& values = rows.numeric(stump.feature).values;
      for (std::size_t r = 0; r < n; ++r)
        out[r] += values[r] <= num->threshold ? stump.left_value : stump.right_value;
    } else {
      const auto& cat = std::get<CategoricalSplit>(stump.split);
      const auto& column = rows.categorical(stump.feature);
      const std::set<std::string> left(cat.left_levels.begin(), cat.left_levels.end());
      goes_left.assign(column.levels->size(), 0);
      for (std::size_t l = 0; l < column.levels->size(); ++l)
        goes_left[l] = left.count((*column.levels)[l]) ? 1 : 0;
      for (std::size_t r = 0; r < n; ++r)
        out[r] += goes_left[column.codes[r]] ? stump.left_value : stump.right_value;
    }
  }
  return out;
}

std::vector<double> GbmModel::predict(const Dataset& rows) const {
  auto scores = raw_scores(rows);
  for (auto& s : scores) s = sigmoid(s);
  return scores;
}

// ---------------------------------------------------------------------------
// Persistence

std::string GbmModel::to_json_text() const {
  json doc;
  doc["format"] = kFormatVersion;
  doc["model"] = "gbm-stumps";
  doc["init_score"] = init_score_;
  doc["hyperparams"] = {{"n_trees", hyperparams_.n_trees()},
                        {"shrinkage", hyperparams_.shrinkage()},
                        {"bag_fraction", hyperparams_.bag_fraction()},
                        {"interaction_depth", GbmHyperparams::interaction_depth()}};
  doc["schema_fingerprint"] = schema_fingerprint();
  doc["features"] = json::array();
  for (const auto& f : features_) {
    json entry{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.kind == ColumnKind::Categorical) entry["levels"] = f.levels;
    doc["features"].push_back(std::move(entry));
  }
  doc["trees"] = json::array();
  for (const auto& stump : trees_) {
    json entry{{"feature", stump.feature},
               {"feature_name", features_[stump.feature].name},
               {"left_value", stump.left_value},
               {"right_value", stump.right_value}};
    if (const auto* num = std::get_if<NumericSplit>(&stump.split))
      entry["threshold"] = num->threshold;
    else
      entry["left_levels"] = std::get<CategoricalSplit>(stump.split).left_levels;
    doc["trees"].push_back(std::move(entry));
  }
  return doc.dump(1) + "\n";
}

GbmModel GbmModel::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format"))
    throw Error(ErrorCode::CorruptFile, "model file has no 'format' key");
  if (doc["format"] != kFormatVersion)
    throw Error(ErrorCode::FormatVersionMismatch, "unsupported model format " + doc["format"].dump());
  try {
    if (doc.at("model") != "gbm-stumps")
      throw Error(ErrorCode::CorruptFile, "not a gbm-stumps model");
    const auto& hp = doc.at("hyperparams");
    if (hp.at("interaction_depth").get<int>() != 1)
      throw Error(ErrorCode::CorruptFile, "only interaction_depth 1 is supported");
    GbmHyperparams hyperparams(hp.at("n_trees").get<std::size_t>(), hp.at("shrinkage").get<double>(),
                               hp.at("bag_fraction").get<double>());
    std::vector<FeatureInfo> features;
    for (const auto& f : doc.at("features")) {
      FeatureInfo info{f.at("name").get<std::string>(), ColumnKind::Numeric, {}};
      const auto kind = f.at("kind").get<std::string>();
      if (kind == "categorical") {
        info.kind = ColumnKind::Categorical;
        info.levels = f.at("levels").get<std::vector<std::string>>();
      } else if (kind != "numeric") {
        throw Error(ErrorCode::CorruptFile, "unknown feature kind '" + kind + "'");
      }
      features.push_back(std::move(info));
    }
    std::vector<Stump> trees;
    for (const auto& t : doc.at("trees")) {
      Stump stump;
      stump.feature = t.at("feature").get<std::size_t>();
      stump.left_value = t.at("left_value").get<double>();
      stump.right_value = t.at("right_value").get<double>();
      if (t.contains("threshold"))
        stump.split = NumericSplit{t.at("threshold").get<double>()};
      else
        stump.split = CategoricalSplit{t.at("left_levels").get<std::vector<std::string>>()};
      trees.push_back(std::move(stump));
    }
    if (trees.size() != hyperparams.n_trees())
      throw Error(ErrorCode::CorruptFile, "tree count does not match hyperparams.n_trees");
    GbmModel model(doc.at("init_score").get<double>(), std::move(trees), hyperparams, std::move(features));
    if (doc.at("schema_fingerprint").get<std::string>() != model.schema_fingerprint())
      throw Error(ErrorCode::CorruptFile, "schema fingerprint does not match feature list");
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::CorruptFile, e.what());
    throw;
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct SplitCandidate {
  double gain = -std::numeric_limits<double>::infinity();
  std::size_t feature = 0;
  std::variant<NumericSplit, CategoricalSplit> split;
  // categorical: level codes sent left (training dictionary)
  std::vector<char> left_codes;
  bool found = false;
};

class StumpBooster {
 public:
  StumpBooster(const Dataset& train, const GbmHyperparams& hp, std::uint64_t seed)
      : data_(train), hp_(hp), seed_(seed), n_(train.n_rows()) {
    // Row order per numeric feature, ties by row index.
    sorted_.resize(data_.n_features());
    for (std::size_t f = 0; f < data_.n_features(); ++f) {
      if (data_.schema()[f].kind != ColumnKind::Numeric) continue;
      const auto& values = data_.numeric(f).values;
      auto& order = sorted_[f];
      order.resize(n_);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    }
  }

  GbmModel run() {
    if (!data_.has_both_classes())
      throw Error(ErrorCode::SingleClassTarget, "training target has a single class");
    const auto& y = data_.target();
    const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double p_bar = positives / static_cast<double>(n_);
    const double init = std::log(p_bar / (1.0 - p_bar));

    score_.assign(n_, init);
    residual_.assign(n_, 0.0);
    hessian_.assign(n_, 0.0);
    in_bag_.assign(n_, 0);

    auto bag_size = static_cast<std::size_t>(
        std::ceil(hp_.bag_fraction() * static_cast<double>(n_) * (1.0 - 1e-12)));
    bag_size = std::clamp<std::size_t>(bag_size, 1, n_);

    const std::uint64_t tree_stream = derive_seed(seed_, streams::kGbmTree);
    std::vector<Stump> trees;
    trees.reserve(hp_.n_trees());
    for (std::size_t t = 0; t < hp_.n_trees(); ++t) {
      Rng rng(derive_seed(tree_stream, t));
      bag_ = sample_without_replacement(rng, n_, bag_size);
      std::sort(bag_.begin(), bag_.end());
      std::fill(in_bag_.begin(), in_bag_.end(), 0);
      for (auto r : bag_) {
        in_bag_[r] = 1;
        const double p = sigmoid(score_[r]);
        residual_[r] = y[r] - p;
        hessian_[r] = p * (1.0 - p);
      }
      trees.push_back(grow());
      const auto& stump = trees.back();
      for (std::size_t r = 0; r < n_; ++r)
        score_[r] += goes_left(stump, r) ? stump.left_value : stump.right_value;
    }
    return GbmModel(init, std::move(trees), hp_, feature_info(data_));
  }

 private:
  bool goes_left(const Stump& stump, std::size_t row) const {
    if (const auto* num = std::get_if<NumericSplit>(&stump.split))
      return data_.numeric(stump.feature).values[row] <= num->threshold;
    return left_codes_[data_.categorical(stump.feature).codes[row]] != 0;
  }

  void consider(SplitCandidate& best, double gain, std::size_t feature,
                std::variant<NumericSplit, CategoricalSplit> split, std::vector<char> left_codes) {
    // Strict improvement only: earlier (lower feature, lower threshold) wins ties.
    if (best.found && !(gain > best.gain)) return;
    best.gain = gain;
    best.feature = feature;
    best.split = std::move(split);
    best.left_codes = std::move(left_codes);
    best.found = true;
  }

  void search_numeric(std::size_t f, double total, double count, SplitCandidate& best) {
    const auto& values = data_.numeric(f).values;
    const double base = total * total / count;
    double left_sum = 0.0, left_count = 0.0;
    std::size_t previous = n_;
    for (auto r : sorted_[f]) {
      if (!in_bag_[r]) continue;
      if (previous != n_ && values[r] > values[previous]) {
        const double right_sum = total - left_sum, right_count = count - left_count;
        const double gain = left_sum * left_sum / left_count + right_sum * right_sum / right_count - base;
        // Skip the (rare) evaluation when nothing would beat the incumbent.
        if (!best.found || gain > best.gain)
          consider(best, gain, f, NumericSplit{0.5 * (values[previous] + values[r])}, {});
      }
      left_sum += residual_[r];
      left_count += 1.0;
      previous = r;
    }
  }

  void search_categorical(std::size_t f, double total, double count, SplitCandidate& best) {
    const auto& column = data_.categorical(f);
    const std::size_t n_levels = column.levels->size();
    std::vector<double> sums(n_levels, 0.0), counts(n_levels, 0.0);
    for (auto r : bag_) {
      sums[column.codes[r]] += residual_[r];
      counts[column.codes[r]] += 1.0;
    }
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < n_levels; ++l)
      if (counts[l] > 0) present.push_back(l);
    if (present.size() < 2) return;
    std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
      return sums[a] / counts[a] < sums[b] / counts[b];
    });
    const double base = total * total / count;
    double left_sum = 0.0, left_count = 0.0;
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
      left_sum += sums[present[k]];
      left_count += counts[present[k]];
      const double right_sum = total - left_sum, right_count = count - left_count;
      const double gain = left_sum * left_sum / left_count + right_sum * right_sum / right_count - base;
      if (best.found && !(gain > best.gain)) continue;
      std::vector<char> left(n_levels, 0);
      std::vector<std::string> names;
      for (std::size_t j = 0; j <= k; ++j) left[present[j]] = 1;
      for (std::size_t l = 0; l < n_levels; ++l)
        if (left[l]) names.push_back((*column.levels)[l]);
      consider(best, gain, f, CategoricalSplit{std::move(names)}, std::move(left));
    }
  }

  // Used only when no feature varies within the bag: both leaves get the same
  // value, so the split itself is irrelevant.
  SplitCandidate constant_split() const {
    SplitCandidate c;
    c.found = true;
    c.feature = 0;
    if (data_.schema()[0].kind == ColumnKind::Numeric) {
      const auto& values = data_.numeric(0).values;
      double hi = values[bag_.front()];
      for (auto r : bag_) hi = std::max(hi, values[r]);
      c.split = NumericSplit{hi};
    } else {
      const auto& column = data_.categorical(0);
      c.left_codes.assign(column.levels->size(), 0);
      c.left_codes[column.codes[bag_.front()]] = 1;
      c.split = CategoricalSplit{{column.level_name(bag_.front())}};
    }
    return c;
  }

  Stump grow() {
    double total = 0.0;
    for (auto r : bag_) total += residual_[r];
    const auto count = static_cast<double>(bag_.size());

    SplitCandidate best;
    for (std::size_t f = 0; f < data_.n_features(); ++f) {
      if (data_.schema()[f].kind == ColumnKind::Numeric)
        search_numeric(f, total, count, best);
      else
        search_categorical(f, total, count, best);
    }
    const bool degenerate = !best.found;
    if (degenerate) best = constant_split();

    Stump stump;
    stump.feature = best.feature;
    stump.split = best.split;
    left_codes_ = best.left_codes;

    double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
    for (auto r : bag_) {
      if (!degenerate && goes_left(stump, r)) {
        gl += residual_[r];
        hl += hessian_[r];
      } else {
        gr += residual_[r];
        hr += hessian_[r];
      }
    }
    stump.right_value = leaf_value(gr, hr);
    stump.left_value = degenerate ? stump.right_value : leaf_value(gl, hl);
    return stump;
  }

  double leaf_value(double gradient_sum, double hessian_sum) const {
    if (!(hessian_sum > 0.0)) return 0.0;
    return hp_.shrinkage() * std::clamp(gradient_sum / hessian_sum, -kLeafClamp, kLeafClamp);
  }

  const Dataset& data_;
  GbmHyperparams hp_;
  std::uint64_t seed_;
  std::size_t n_;
  std::vector<std::vector<std::size_t>> sorted_;
  std::vector<double> score_, residual_, hessian_;
  std::vector<char> in_bag_;
  std::vector<std::size_t> bag_;
  std::vector<char> left_codes_;
};

}  // namespace

GbmModel fit_gbm(const Dataset& train, const GbmHyperparams& hp, std::uint64_t seed) {
  if (train.n_rows() == 0) throw Error(ErrorCode::InvalidArgument, "cannot fit on zero rows");
  return StumpBooster(train, hp, seed).run();
}

GbmSearchResult random_search_gbm(const Dataset& train, const Dataset& valid,
                                  const GbmSearchRanges& ranges, std::size_t n_draws,
                                  std::uint64_t seed, std::size_t jobs) {
  if (n_draws < 1) throw Error(ErrorCode::InvalidArgument, "random search needs at least one draw");
  if (ranges.min_trees > ranges.max_trees || ranges.min_shrinkage > ranges.max_shrinkage ||
      ranges.min_bag_fraction > ranges.max_bag_fraction)
    throw Error(ErrorCode::InvalidArgument, "search range has min > max");
  if (valid.n_rows() == 0 || !valid.has_both_classes())
    throw Error(ErrorCode::SingleClassTarget, "validation data needs both classes");

  Rng rng(derive_seed(seed, streams::kSearchDraws));
  std::vector<GbmHyperparams> draws;
  for (std::size_t d = 0; d < n_draws; ++d) {
    const auto trees = ranges.min_trees + rng.below(ranges.max_trees - ranges.min_trees + 1);
    const double shrinkage = rng.uniform(ranges.min_shrinkage, ranges.max_shrinkage);
    const double bag = rng.uniform(ranges.min_bag_fraction, ranges.max_bag_fraction);
    draws.emplace_back(static_cast<std::size_t>(trees), shrinkage, bag);
  }

  const std::uint64_t fit_stream = derive_seed(seed, streams::kSearchFit);
  std::vector<std::optional<GbmModel>> models(n_draws);
  std::vector<double> scores(n_draws, 0.0);
  parallel_for(n_draws, jobs, [&](std::size_t d) {
    models[d] = fit_gbm(train, draws[d], derive_seed(fit_stream, d));
    const auto predicted = models[d]->predict(valid);
    scores[d] = auc(predicted, valid.target());
  });

  std::size_t best = 0;
  for (std::size_t d = 1; d < n_draws; ++d)
    if (scores[d] > scores[best]) best = d;
  return {std::move(*models[best]), draws[best], scores[best], best};
}

std::string BuiltinSurrogate::describe() const {
  const auto& hp = model_.hyperparams();
  return "builtin gbm (n_trees=" + std::to_string(hp.n_trees()) +
         ", shrinkage=" + format_double(hp.shrinkage()) +
         ", bag_fraction=" + format_double(hp.bag_fraction()) + ")";
}

SurrogateHandle make_builtin(GbmModel model) {
  return std::make_shared<const BuiltinSurrogate>(std::move(model));
}

}  // namespace safe
