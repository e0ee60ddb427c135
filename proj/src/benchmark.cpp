#include <algorithm>
#include <iostream>
#include <numeric>

#include "safe/error.hpp"
#include "safe/evaluation.hpp"
#include "safe/random.hpp"
#include "safe/util.hpp"

namespace safe {

const char* to_string(ModelLabel label) {
  switch (label) {
    case ModelLabel::Vanilla:
      return "vanilla";
    case ModelLabel::Surrogate:
      return "surrogate";
    case ModelLabel::Refined:
      return "refined";
  }
  return "?";
}

RankPoints rank_points(std::span<const AucTriplet> splits) {
  RankPoints out;
  if (splits.empty()) throw Error(ErrorCode::InvalidArgument, "rank points need at least one split");
  for (const auto& aucs : splits) {
    std::array<std::size_t, kModelCount> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return aucs[a] > aucs[b]; });
    for (std::size_t i = 0; i < kModelCount;) {
      std::size_t j = i;
      while (j + 1 < kModelCount && aucs[order[j + 1]] == aucs[order[i]]) ++j;
      double shared = 0.0;
      for (std::size_t pos = i; pos <= j; ++pos) shared += static_cast<double>(kModelCount - 1 - pos);
      shared /= static_cast<double>(j - i + 1);
      for (std::size_t pos = i; pos <= j; ++pos) out.points[order[pos]] += shared;
      i = j + 1;
    }
  }
  for (std::size_t m = 0; m < kModelCount; ++m) {
    out.points[m] /= static_cast<double>(splits.size());
    out.barycentric[m] = out.points[m] / 3.0;
  }
  return out;
}

SurrogateConfig SurrogateConfig::parse(const std::string& text) {
  SurrogateConfig config;
  if (text == "gbm-default") return config;
  const std::string tuned = "gbm-tuned:", external = "external:";
  if (text.rfind(tuned, 0) == 0) {
    double draws = 0.0;
    if (!parse_double(text.substr(tuned.size()), draws) || draws < 1 || draws != static_cast<double>(static_cast<std::size_t>(draws)))
      throw Error(ErrorCode::InvalidArgument, "gbm-tuned needs a positive number of draws, got '" + text + "'");
    config.kind = Kind::GbmTuned;
    config.n_draws = static_cast<std::size_t>(draws);
    return config;
  }
  if (text.rfind(external, 0) == 0 && text.size() > external.size()) {
    config.kind = Kind::External;
    config.command = text.substr(external.size());
    return config;
  }
  throw Error(ErrorCode::InvalidArgument,
              "surrogate must be gbm-default, gbm-tuned:<n> or external:<command>, got '" + text + "'");
}

std::string SurrogateConfig::to_string() const {
  switch (kind) {
    case Kind::GbmDefault:
      return "gbm-default";
    case Kind::GbmTuned:
      return "gbm-tuned:" + std::to_string(n_draws);
    case Kind::External:
      return "external:" + command;
  }
  return "?";
}

std::size_t BenchmarkResult::n_succeeded() const {
  return static_cast<std::size_t>(std::count_if(splits.begin(), splits.end(), [](const SplitResult& s) { return !s.failed; }));
}

// ---------------------------------------------------------------------------

SplitResult run_split(const Dataset& data, const Split& split, std::size_t index, const BenchmarkConfig& config,
                      std::size_t inner_jobs) {
  SplitResult result;
  result.index = index;
  const std::uint64_t seed = derive_seed(derive_seed(config.seed, streams::kSplit), index);
  const Dataset train = subset(data, split.train);
  const Dataset test = subset(data, split.test);
  if (!train.has_both_classes())
    throw Error(ErrorCode::DegenerateTrainPartition, "train partition has a single class");
  if (!test.has_both_classes()) throw Error(ErrorCode::SingleClassTarget, "test partition has a single class");

  const auto slot = [](ModelLabel m) { return static_cast<std::size_t>(m); };

  // Vanilla logistic on raw features.
  const DesignMatrix raw_train = raw_design(train);
  const LogisticModel vanilla = fit_logistic(raw_train, train.target(), config.logistic);
  result.auc[slot(ModelLabel::Vanilla)] = auc(predict_logistic(vanilla, raw_design(test)), test.target());
  result.param_count[slot(ModelLabel::Vanilla)] = param_count(vanilla);

  // Surrogate, refit on this split's train partition.
  SurrogateHandle surrogate;
  switch (config.surrogate.kind) {
    case SurrogateConfig::Kind::GbmDefault: {
      auto model = fit_gbm(train, config.surrogate.hyperparams, seed);
      result.param_count[slot(ModelLabel::Surrogate)] = param_count(model);
      surrogate = make_builtin(std::move(model));
      break;
    }
    case SurrogateConfig::Kind::GbmTuned: {
      const Split inner = stratified_split(train.target(), 0.75, derive_seed(seed, streams::kTuneSplit));
      auto search = random_search_gbm(subset(train, inner.train), subset(train, inner.test), config.search_ranges,
                                      config.surrogate.n_draws, seed, inner_jobs);
      result.tuned = search.hyperparams;
      auto model = fit_gbm(train, search.hyperparams, seed);
      result.param_count[slot(ModelLabel::Surrogate)] = param_count(model);
      surrogate = make_builtin(std::move(model));
      break;
    }
    case SurrogateConfig::Kind::External:
      surrogate = make_external(config.surrogate.command);
      break;
  }
  result.auc[slot(ModelLabel::Surrogate)] = auc(surrogate->score(test), test.target());

  // Extraction and the refined model.
  ExtractionOptions opts = config.extraction;
  opts.seed = seed;
  opts.jobs = inner_jobs;
  TransformSet transforms = extract_all(surrogate, train, opts);
  const DesignMatrix refined_train = apply(transforms, train, UnseenPolicy::Reference);
  LogisticModel refined = fit_logistic(refined_train, train.target(), config.logistic);
  result.auc[slot(ModelLabel::Refined)] =
      auc(predict_logistic(refined, apply(transforms, test, UnseenPolicy::Reference)), test.target());
  result.param_count[slot(ModelLabel::Refined)] = param_count(refined);
  result.transforms = std::move(transforms);
  result.refined = std::move(refined);
  return result;
}

BenchmarkResult run_benchmark(const Dataset& data, const SplitPlan& plan, const BenchmarkConfig& config) {
  validate_split_plan(plan, data.n_rows());
  const std::size_t n_splits = plan.splits.size();
  const std::size_t outer_jobs = std::min(std::max<std::size_t>(config.jobs, 1), n_splits);
  const std::size_t inner_jobs = n_splits > 1 ? 1 : std::max<std::size_t>(config.jobs, 1);

  BenchmarkResult result;
  result.label = config.label;
  result.splits.resize(n_splits);
  parallel_for(n_splits, outer_jobs, [&](std::size_t i) {
    try {
      result.splits[i] = run_split(data, plan.splits[i], i, config, inner_jobs);
    } catch (const std::exception& e) {
      result.splits[i] = SplitResult{};
      result.splits[i].index = i;
      result.splits[i].failed = true;
      result.splits[i].error = e.what();
    }
  });

  std::vector<AucTriplet> triplets;
  for (const auto& s : result.splits) {
    if (s.failed) {
      const std::string message = "split " + std::to_string(s.index) + " failed and is skipped: " + s.error;
      if (config.warn)
        config.warn(message);
      else
        std::cerr << "warning: " << message << "\n";
      continue;
    }
    triplets.push_back(s.auc);
  }
  if (triplets.empty()) throw Error(ErrorCode::InvalidArgument, "every split failed");

  for (std::size_t m = 0; m < kModelCount; ++m) {
    std::vector<double> aucs;
    std::vector<double> counts;
    for (const auto& s : result.splits) {
      if (s.failed) continue;
      aucs.push_back(s.auc[m]);
      if (s.param_count[m]) counts.push_back(static_cast<double>(*s.param_count[m]));
    }
    auto& summary = result.summary[m];
    summary.mean_auc = mean(aucs);
    summary.sd_auc = sample_sd(aucs);
    if (counts.size() == aucs.size()) summary.mean_param_count = mean(counts);
  }
  result.ranks = rank_points(triplets);

  std::vector<double> vanilla, surrogate, refined;
  for (const auto& t : triplets) {
    vanilla.push_back(t[0]);
    surrogate.push_back(t[1]);
    refined.push_back(t[2]);
  }
  result.surrogate_vs_refined = wilcoxon_rank_sum(surrogate, refined);
  result.vanilla_vs_refined = wilcoxon_rank_sum(vanilla, refined);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string optional_count(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

ModelLabel label_at(std::size_t m) { return static_cast<ModelLabel>(m); }

}  // namespace

std::string report_tsv(std::span<const BenchmarkResult> results) {
  std::string out = "dataset\tmodel\tmean_auc\tsd_auc\tmean_param_count\n";
  for (const auto& r : results)
    for (std::size_t m = 0; m < kModelCount; ++m)
      out += r.label + "\t" + to_string(label_at(m)) + "\t" + format_double(r.summary[m].mean_auc) + "\t" +
             format_double(r.summary[m].sd_auc) + "\t" + optional_count(r.summary[m].mean_param_count) + "\n";
  return out;
}

std::string barycentric_tsv(std::span<const BenchmarkResult> results) {
  std::string out = "dataset\tmodel\tpoints\tbarycentric\n";
  for (const auto& r : results)
    for (std::size_t m = 0; m < kModelCount; ++m)
      out += r.label + "\t" + to_string(label_at(m)) + "\t" + format_double(r.ranks.points[m]) + "\t" +
             format_double(r.ranks.barycentric[m]) + "\n";
  return out;
}

std::string tradeoff_tsv(std::span<const BenchmarkResult> results) {
  std::string out = "dataset\tmodel\tparam_count\tauc\n";
  for (const auto& r : results)
    for (std::size_t m = 0; m < kModelCount; ++m)
      out += r.label + "\t" + to_string(label_at(m)) + "\t" + optional_count(r.summary[m].mean_param_count) + "\t" +
             format_double(r.summary[m].mean_auc) + "\n";
  return out;
}

std::string splits_tsv(std::span<const BenchmarkResult> results) {
  std::string out = "dataset\tsplit\tstatus";
  for (std::size_t m = 0; m < kModelCount; ++m) out += std::string("\tauc_") + to_string(label_at(m));
  for (std::size_t m = 0; m < kModelCount; ++m) out += std::string("\tparams_") + to_string(label_at(m));
  out += "\n";
  for (const auto& r : results) {
    for (const auto& s : r.splits) {
      out += r.label + "\t" + std::to_string(s.index) + "\t" + (s.failed ? "failed" : "ok");
      for (std::size_t m = 0; m < kModelCount; ++m) out += "\t" + (s.failed ? std::string("NA") : format_double(s.auc[m]));
      for (std::size_t m = 0; m < kModelCount; ++m)
        out += "\t" + (s.param_count[m] ? std::to_string(*s.param_count[m]) : std::string("NA"));
      out += "\n";
    }
  }
  return out;
}

std::string tests_tsv(std::span<const BenchmarkResult> results) {
  std::string out = "dataset\tcomparison\tstatistic\tp_value\texact\n";
  auto line = [&](const BenchmarkResult& r, const char* name, const WilcoxonResult& w) {
    out += r.label + "\t" + name + "\t" + format_double(w.statistic) + "\t" + format_double(w.p_value) + "\t" +
           (w.exact ? "true" : "false") + "\n";
  };
  for (const auto& r : results) {
    line(r, "surrogate_vs_refined", r.surrogate_vs_refined);
    line(r, "vanilla_vs_refined", r.vanilla_vs_refined);
  }
  return out;
}

}  // namespace safe
