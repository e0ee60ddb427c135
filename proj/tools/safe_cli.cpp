#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "safe/data.hpp"
#include "safe/error.hpp"
#include "safe/evaluation.hpp"
#include "safe/extraction.hpp"
#include "safe/glassbox.hpp"
#include "safe/random.hpp"
#include "safe/surrogate.hpp"
#include "safe/transform.hpp"
#include "safe/util.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace safe;

namespace {

struct Globals {
  std::string schema;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool quiet = false;
};

class Manifest {
 public:
  Manifest(std::string command, const Globals& g) : command_(std::move(command)), seed_(g.seed) {
    options_["jobs"] = g.jobs;
  }

  void option(const std::string& key, const ojson& value) { options_[key] = value; }

  void input(const std::string& path) {
    inputs_.push_back({{"path", path}, {"fnv1a64", hex64(fnv1a64(read_file(path)))}});
  }

  void output(const std::string& path) { outputs_.push_back(path); }

  void write(const fs::path& path) const {
    ojson doc = {{"tool", "safe"},      {"version", SAFE_VERSION}, {"command", command_}, {"seed", seed_},
                 {"options", options_}, {"inputs", inputs_},       {"outputs", outputs_}};
    write_file(path, doc.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  ojson options_ = ojson::object();
  ojson inputs_ = ojson::array();
  ojson outputs_ = ojson::array();
};

fs::path manifest_path(const std::string& out) { return out + ".manifest.json"; }

Schema load_schema(const Globals& g) {
  if (g.schema.empty()) throw Error(ErrorCode::InvalidArgument, "--schema is required for this command");
  return Schema::from_json_file(g.schema);
}

void note(const Globals& g, const std::string& message) {
  if (!g.quiet) std::cerr << message << "\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out;
  std::size_t trees = 100;
  double shrinkage = 0.1, bag_fraction = 0.5;
  std::size_t tune = 0;
};

int train_surrogate(const Globals& g, const TrainArgs& a) {
  const Schema schema = load_schema(g);
  const Dataset data = load_csv(a.data, schema);
  Manifest manifest("train-surrogate", g);
  manifest.input(g.schema);
  manifest.input(a.data);

  std::optional<GbmModel> model;
  if (a.tune > 0) {
    const Split inner = stratified_split(data.target(), 0.75, derive_seed(g.seed, streams::kTuneSplit));
    auto search = random_search_gbm(subset(data, inner.train), subset(data, inner.test), GbmSearchRanges{}, a.tune,
                                    g.seed, g.jobs);
    note(g, "best draw " + std::to_string(search.draw_index) + " validation auc " +
                format_double(search.validation_auc));
    model = fit_gbm(data, search.hyperparams, g.seed);
    manifest.option("tune", a.tune);
    manifest.option("selected", {{"trees", search.hyperparams.n_trees()},
                                 {"shrinkage", search.hyperparams.shrinkage()},
                                 {"bag_fraction", search.hyperparams.bag_fraction()}});
  } else {
    const GbmHyperparams hp(a.trees, a.shrinkage, a.bag_fraction);
    model = fit_gbm(data, hp, g.seed);
    manifest.option("trees", a.trees);
    manifest.option("shrinkage", a.shrinkage);
    manifest.option("bag_fraction", a.bag_fraction);
  }
  write_file(a.out, model->to_json_text());
  manifest.output(a.out);
  manifest.write(manifest_path(a.out));
  note(g, "wrote " + a.out + " (" + std::to_string(model->trees().size()) + " trees)");
  return 0;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string data, surrogate, external, out, profiles;
  std::string penalty = "mbic", clusters = "auto";
  std::size_t grid_max = 100, sample_cap = 10000;
};

std::string profiles_tsv(const Dataset& data, const std::vector<FeatureExtraction>& all) {
  std::string out = "feature\tkind\tx\tresponse\tsegment\n";
  for (const auto& fx : all) {
    if (fx.profile) {
      const auto& p = *fx.profile;
      const auto& name = data.schema()[p.feature].name;
      std::size_t segment = 0, next = 0;
      const auto& cps = fx.segmentation ? fx.segmentation->changepoints : std::vector<std::size_t>{};
      for (std::size_t i = 0; i < p.grid.size(); ++i) {
        out += name + "\tnumeric\t" + format_double(p.grid[i]) + "\t" + format_double(p.values[i]) + "\t" +
               std::to_string(segment) + "\n";
        if (next < cps.size() && cps[next] == i) {
          ++segment;
          ++next;
        }
      }
    }
    if (fx.levels) {
      const auto& lr = *fx.levels;
      const auto& name = data.schema()[lr.feature].name;
      const auto& levels = *data.categorical(lr.feature).levels;
      std::map<std::string, std::size_t> groups;
      if (const auto* merge = std::get_if<CategoricalMerge>(&fx.transform)) groups = merge->level_to_group();
      for (std::size_t l = 0; l < lr.responses.size(); ++l) {
        auto it = groups.find(levels[l]);
        out += name + "\tcategorical\t" + levels[l] + "\t" + format_double(lr.responses[l]) + "\t" +
               (it == groups.end() ? std::string("0") : std::to_string(it->second)) + "\n";
      }
    }
  }
  return out;
}

int extract(const Globals& g, const ExtractArgs& a) {
  const Schema schema = load_schema(g);
  Manifest manifest("extract", g);
  manifest.input(g.schema);
  manifest.input(a.data);
  SurrogateHandle surrogate;
  if (!a.surrogate.empty() == !a.external.empty())
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --surrogate and --external");
  if (!a.surrogate.empty()) {
    surrogate = make_builtin(GbmModel::from_json_text(read_file(a.surrogate)));
    manifest.input(a.surrogate);
  } else {
    surrogate = make_external(a.external);
    manifest.option("external", a.external);
  }
  const Dataset data = load_csv(a.data, schema);

  ExtractionOptions opts;
  opts.penalty = PenaltySpec::parse(a.penalty);
  opts.parse_clusters(a.clusters);
  opts.grid_max = a.grid_max;
  opts.sample_cap = a.sample_cap;
  opts.seed = g.seed;
  opts.jobs = g.jobs;
  manifest.option("penalty", opts.penalty.to_string());
  manifest.option("clusters", opts.clusters_to_string());
  manifest.option("grid_max", opts.grid_max);
  manifest.option("sample_cap", opts.sample_cap);

  auto detailed = extract_all_detailed(surrogate, data, opts);
  if (!a.profiles.empty()) {
    write_file(a.profiles, profiles_tsv(data, detailed));
    manifest.output(a.profiles);
  }
  std::vector<FeatureTransform> transforms;
  std::size_t kept = 0;
  for (auto& fx : detailed) {
    kept += std::holds_alternative<DroppedFeature>(fx.transform) ? 0 : 1;
    transforms.push_back(std::move(fx.transform));
  }
  const TransformSet set(schema, std::move(transforms),
                         Provenance{surrogate->describe(), opts.penalty.to_string(), opts.clusters_to_string(),
                                    opts.grid_max, opts.sample_cap, opts.seed});
  set.save(a.out);
  manifest.output(a.out);
  manifest.write(manifest_path(a.out));
  note(g, "wrote " + a.out + " (" + std::to_string(kept) + " of " + std::to_string(schema.size()) +
              " features kept, " + std::to_string(design_width(set)) + " design columns)");
  return 0;
}

// ---------------------------------------------------------------------------

struct TransformArgs {
  std::string data, transforms, out, unseen = "error";
  bool no_target = false;
};

UnseenPolicy parse_unseen(const std::string& text) {
  if (text == "error") return UnseenPolicy::Error;
  if (text == "reference") return UnseenPolicy::Reference;
  throw Error(ErrorCode::InvalidArgument, "--unseen must be 'error' or 'reference', got '" + text + "'");
}

int transform(const Globals& g, const TransformArgs& a) {
  const Schema schema = load_schema(g);
  const UnseenPolicy policy = parse_unseen(a.unseen);
  const TransformSet set = TransformSet::load(a.transforms);
  const Dataset data = load_csv(a.data, schema);
  const DesignMatrix design = apply(set, data, policy);
  write_file(a.out, a.no_target ? design.to_csv() : design.to_csv(&data.target(), schema.target()));

  Manifest manifest("transform", g);
  manifest.input(g.schema);
  manifest.input(a.data);
  manifest.input(a.transforms);
  manifest.option("unseen", a.unseen);
  manifest.option("target", !a.no_target);
  manifest.output(a.out);
  manifest.write(manifest_path(a.out));
  note(g, "wrote " + a.out + " (" + std::to_string(design.n_rows()) + " rows, " + std::to_string(design.n_cols()) +
              " columns)");
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string design, data, transforms, target, out, coef_out, unseen = "error";
  LogisticOptions logistic;
};

int fit(const Globals& g, const FitArgs& a) {
  Manifest manifest("fit", g);
  std::vector<std::uint8_t> target;
  std::optional<DesignMatrix> design;
  if (!a.design.empty()) {
    if (!a.data.empty() || !a.transforms.empty())
      throw Error(ErrorCode::InvalidArgument, "--design cannot be combined with --data/--transforms");
    std::string target_name = a.target;
    if (target_name.empty()) {
      if (g.schema.empty()) throw Error(ErrorCode::InvalidArgument, "--design needs --target or --schema");
      target_name = Schema::from_json_file(g.schema).target();
      manifest.input(g.schema);
    }
    design = DesignMatrix::from_csv(read_file(a.design), target_name, target);
    manifest.input(a.design);
    manifest.option("target", target_name);
  } else {
    if (a.data.empty() || a.transforms.empty())
      throw Error(ErrorCode::InvalidArgument, "give --design, or both --data and --transforms");
    const Schema schema = load_schema(g);
    const TransformSet set = TransformSet::load(a.transforms);
    const Dataset data = load_csv(a.data, schema);
    design = apply(set, data, parse_unseen(a.unseen));
    target = data.target();
    manifest.input(g.schema);
    manifest.input(a.data);
    manifest.input(a.transforms);
    manifest.option("unseen", a.unseen);
  }
  const LogisticModel model = fit_logistic(*design, target, a.logistic);
  if (!model.diagnostics().converged)
    std::cerr << "warning: logistic fit did not converge after " << model.diagnostics().iterations
              << " iterations (gradient max-norm " << format_double(model.diagnostics().grad_norm) << ")\n";
  const std::string coef_out = a.coef_out.empty() ? a.out + ".coef.tsv" : a.coef_out;
  write_file(a.out, model.to_json_text());
  write_file(coef_out, model.coefficients_tsv());
  manifest.option("ridge", a.logistic.ridge);
  manifest.option("tol", a.logistic.tol);
  manifest.option("max_iter", a.logistic.max_iter);
  manifest.output(a.out);
  manifest.output(coef_out);
  manifest.write(manifest_path(a.out));
  note(g, "wrote " + a.out + " (" + std::to_string(param_count(model)) + " parameters)");
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string data, splits, outdir, label, surrogate = "gbm-default";
  std::string penalty = "mbic", clusters = "auto";
  std::size_t n_splits = 10, grid_max = 100, sample_cap = 10000;
  double train_fraction = 0.7;
  LogisticOptions logistic;
};

int benchmark(const Globals& g, const BenchArgs& a) {
  const Schema schema = load_schema(g);
  const Dataset data = load_csv(a.data, schema);
  Manifest manifest("benchmark", g);
  manifest.input(g.schema);
  manifest.input(a.data);

  SplitPlan plan;
  if (!a.splits.empty()) {
    plan = load_splits(a.splits, data.n_rows());
    manifest.input(a.splits);
  } else {
    if (a.n_splits == 0) throw Error(ErrorCode::InvalidArgument, "--n-splits must be positive");
    if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0))
      throw Error(ErrorCode::InvalidArgument, "--train-fraction must be in (0, 1)");
    for (std::size_t i = 0; i < a.n_splits; ++i)
      plan.splits.push_back(stratified_split(data.target(), a.train_fraction,
                                             derive_seed(derive_seed(g.seed, streams::kPlan), i)));
    manifest.option("n_splits", a.n_splits);
    manifest.option("train_fraction", a.train_fraction);
  }

  BenchmarkConfig config;
  config.surrogate = SurrogateConfig::parse(a.surrogate);
  config.extraction.penalty = PenaltySpec::parse(a.penalty);
  config.extraction.parse_clusters(a.clusters);
  config.extraction.grid_max = a.grid_max;
  config.extraction.sample_cap = a.sample_cap;
  config.logistic = a.logistic;
  config.seed = g.seed;
  config.jobs = g.jobs;
  config.label = a.label.empty() ? fs::path(a.data).stem().string() : a.label;
  if (g.quiet) config.warn = [](const std::string&) {};

  const BenchmarkResult result = run_benchmark(data, plan, config);
  const std::vector<BenchmarkResult> results{result};
  fs::create_directories(a.outdir);
  const fs::path dir(a.outdir);
  const std::vector<std::pair<std::string, std::string>> files{
      {"report.tsv", report_tsv(results)},   {"barycentric.tsv", barycentric_tsv(results)},
      {"tradeoff.tsv", tradeoff_tsv(results)}, {"splits.tsv", splits_tsv(results)},
      {"tests.tsv", tests_tsv(results)}};
  for (const auto& [name, contents] : files) {
    write_file(dir / name, contents);
    manifest.output((dir / name).string());
  }
  manifest.option("surrogate", config.surrogate.to_string());
  manifest.option("penalty", config.extraction.penalty.to_string());
  manifest.option("clusters", config.extraction.clusters_to_string());
  manifest.option("grid_max", a.grid_max);
  manifest.option("sample_cap", a.sample_cap);
  manifest.option("ridge", a.logistic.ridge);
  manifest.option("label", config.label);
  if (config.surrogate.kind == SurrogateConfig::Kind::GbmTuned) manifest.option("tuning", "per-split 75/25 stratified sub-split of train");
  manifest.write(dir / "manifest.json");

  if (!g.quiet) std::cerr << report_tsv(results);
  return 0;
}

void add_logistic_flags(CLI::App* cmd, LogisticOptions& opts) {
  cmd->add_option("--ridge", opts.ridge, "L2 penalty on coefficients")->check(CLI::NonNegativeNumber);
  cmd->add_option("--tol", opts.tol, "convergence tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", opts.max_iter, "Newton iteration cap");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted feature extraction for transparent logistic models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(SAFE_VERSION));

  Globals g;
  app.add_option("--schema", g.schema, "schema JSON");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "suppress progress messages");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-surrogate", "fit the built-in stump booster");
  train_cmd->add_option("--data", train.data, "training CSV")->required();
  train_cmd->add_option("--out", train.out, "model JSON")->required();
  train_cmd->add_option("--trees", train.trees, "number of trees")->check(CLI::PositiveNumber);
  train_cmd->add_option("--shrinkage", train.shrinkage, "learning rate in (0,1]")->check(CLI::Range(1e-300, 1.0));
  train_cmd->add_option("--bag-fraction", train.bag_fraction, "row subsample per tree in (0,1]")
      ->check(CLI::Range(1e-300, 1.0));
  train_cmd->add_option("--tune", train.tune, "random-search draws (0 = use the given settings)");

  ExtractArgs ex;
  auto* extract_cmd = app.add_subcommand("extract", "derive binnings and level groups from a surrogate");
  extract_cmd->add_option("--data", ex.data, "CSV")->required();
  extract_cmd->add_option("--surrogate", ex.surrogate, "model JSON from train-surrogate");
  extract_cmd->add_option("--external", ex.external, "shell command scoring feature CSV on stdin");
  extract_cmd->add_option("--out", ex.out, "transform set JSON")->required();
  extract_cmd->add_option("--penalty", ex.penalty, "mbic or const:<lambda>");
  extract_cmd->add_option("--clusters", ex.clusters, "auto, <k> or name=k,...,*=k");
  extract_cmd->add_option("--grid-max", ex.grid_max, "partial dependence grid size")->check(CLI::Range(2, 1 << 20));
  extract_cmd->add_option("--sample-cap", ex.sample_cap, "background rows")->check(CLI::PositiveNumber);
  extract_cmd->add_option("--profiles", ex.profiles, "optional TSV of profiles and level responses");

  TransformArgs tr;
  auto* transform_cmd = app.add_subcommand("transform", "apply a transform set to data");
  transform_cmd->add_option("--data", tr.data, "CSV")->required();
  transform_cmd->add_option("--transforms", tr.transforms, "transform set JSON")->required();
  transform_cmd->add_option("--out", tr.out, "design CSV")->required();
  transform_cmd->add_option("--unseen", tr.unseen, "error or reference");
  transform_cmd->add_flag("--no-target", tr.no_target, "omit the target column");

  FitArgs ft;
  auto* fit_cmd = app.add_subcommand("fit", "fit the logistic model");
  fit_cmd->add_option("--design", ft.design, "design CSV with a target column");
  fit_cmd->add_option("--target", ft.target, "target column of --design (default: schema target)");
  fit_cmd->add_option("--data", ft.data, "CSV (with --transforms)");
  fit_cmd->add_option("--transforms", ft.transforms, "transform set JSON");
  fit_cmd->add_option("--unseen", ft.unseen, "error or reference");
  fit_cmd->add_option("--out", ft.out, "model JSON")->required();
  fit_cmd->add_option("--coef-out", ft.coef_out, "coefficient TSV (default: <out>.coef.tsv)");
  add_logistic_flags(fit_cmd, ft.logistic);

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("benchmark", "vanilla / surrogate / refined comparison over splits");
  bench_cmd->add_option("--data", bn.data, "CSV")->required();
  bench_cmd->add_option("--splits", bn.splits, "JSON list of {train, test} row indices");
  bench_cmd->add_option("--n-splits", bn.n_splits, "random stratified splits when --splits is absent");
  bench_cmd->add_option("--train-fraction", bn.train_fraction, "train share of random splits");
  bench_cmd->add_option("--outdir", bn.outdir, "report directory")->required();
  bench_cmd->add_option("--label", bn.label, "dataset label (default: data file stem)");
  bench_cmd->add_option("--surrogate", bn.surrogate, "gbm-default, gbm-tuned:<n> or external:<command>");
  bench_cmd->add_option("--penalty", bn.penalty, "mbic or const:<lambda>");
  bench_cmd->add_option("--clusters", bn.clusters, "auto, <k> or name=k,...,*=k");
  bench_cmd->add_option("--grid-max", bn.grid_max, "partial dependence grid size")->check(CLI::Range(2, 1 << 20));
  bench_cmd->add_option("--sample-cap", bn.sample_cap, "background rows")->check(CLI::PositiveNumber);
  add_logistic_flags(bench_cmd, bn.logistic);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return train_surrogate(g, train);
    if (extract_cmd->parsed()) return extract(g, ex);
    if (transform_cmd->parsed()) return transform(g, tr);
    if (fit_cmd->parsed()) return fit(g, ft);
    if (bench_cmd->parsed()) return benchmark(g, bn);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
