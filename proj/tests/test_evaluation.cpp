#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "safe/error.hpp"
#include "safe/evaluation.hpp"
#include "safe/random.hpp"
#include "synthetic.hpp"

using namespace safe;

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<std::uint8_t>{1, 1, 0, 0}) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<std::uint8_t>{1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), Error);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<std::uint8_t>{1, 0}), Error);
}

TEST_CASE("auc equals pair counting, is rank invariant and complements") {
  Rng rng(50);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    const bool ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ties ? static_cast<double>(rng.below(5)) : rng.unit();
      y[i] = static_cast<std::uint8_t>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    const double a = auc(s, y);
    CHECK(a == oracle::pair_count_auc(s, y));
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(auc(t, y) == a);
    if (!ties) {
      std::vector<std::uint8_t> flipped(n);
      for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - y[i];
      CHECK(a + auc(s, flipped) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("rank points") {
  std::vector<AucTriplet> best(10, AucTriplet{0.9, 0.8, 0.7});
  const auto a = rank_points(best);
  CHECK(a.points[0] == 2.0);
  CHECK(a.barycentric[0] == doctest::Approx(2.0 / 3.0));
  std::vector<AucTriplet> tied(10, AucTriplet{0.5, 0.5, 0.5});
  CHECK(rank_points(tied).points == AucTriplet{1.0, 1.0, 1.0});
  std::vector<AucTriplet> flip{{0.9, 0.8, 0.7}, {0.7, 0.8, 0.9}};
  CHECK(rank_points(flip).points == AucTriplet{1.0, 1.0, 1.0});
  std::vector<AucTriplet> two_best{{0.9, 0.9, 0.1}};
  CHECK(rank_points(two_best).points == AucTriplet{1.5, 1.5, 0.0});
  CHECK_THROWS_AS(rank_points(std::vector<AucTriplet>{}), Error);

  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AucTriplet> splits(1 + rng.below(10));
    for (auto& t : splits)
      for (auto& v : t) v = static_cast<double>(rng.below(3)) / 2.0;
    const auto r = rank_points(splits);
    CHECK(r.points[0] + r.points[1] + r.points[2] == doctest::Approx(3.0).epsilon(1e-15));
  }
}

TEST_CASE("wilcoxon examples") {
  const auto same = wilcoxon_rank_sum(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4});
  CHECK(same.p_value == doctest::Approx(1.0));
  const auto extreme = wilcoxon_rank_sum(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30});
  CHECK(extreme.exact);
  CHECK(extreme.p_value == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(extreme.statistic == 0.0);
  const auto small = wilcoxon_rank_sum(std::vector<double>{1, 2}, std::vector<double>{3});
  CHECK(small.p_value == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("wilcoxon exact equals enumeration and tracks the normal approximation") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nx = 1 + rng.below(5), ny = 1 + rng.below(5);
    std::vector<double> x(nx), y(ny);
    for (auto& v : x) v = rng.unit();
    for (auto& v : y) v = rng.unit() + 0.3;
    const auto w = wilcoxon_rank_sum(x, y, WilcoxonMode::Exact);
    CHECK(w.p_value == doctest::Approx(oracle::enumerate_rank_sum_p(x, y)).epsilon(1e-12));
  }
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(6), y(6);
    for (auto& v : x) v = rng.unit();
    for (auto& v : y) v = rng.unit() + 0.2;
    const double exact = wilcoxon_rank_sum(x, y, WilcoxonMode::Exact).p_value;
    const double normal = wilcoxon_rank_sum(x, y, WilcoxonMode::Normal).p_value;
    CHECK(std::abs(exact - normal) <= 0.05);
  }
}

TEST_CASE("wilcoxon with ties uses the normal approximation") {
  const auto w = wilcoxon_rank_sum(std::vector<double>{1, 1, 2}, std::vector<double>{2, 3, 3});
  CHECK_FALSE(w.exact);
  CHECK((w.p_value > 0.0 && w.p_value <= 1.0));
}

TEST_CASE("surrogate config parsing") {
  CHECK(SurrogateConfig::parse("gbm-default").kind == SurrogateConfig::Kind::GbmDefault);
  const auto tuned = SurrogateConfig::parse("gbm-tuned:20");
  CHECK(tuned.kind == SurrogateConfig::Kind::GbmTuned);
  CHECK(tuned.n_draws == 20);
  CHECK(SurrogateConfig::parse("external:cat x").command == "cat x");
  CHECK(SurrogateConfig::parse("external:cat x").to_string() == "external:cat x");
  CHECK_THROWS_AS(SurrogateConfig::parse("gbm-tuned:0"), Error);
  CHECK_THROWS_AS(SurrogateConfig::parse("svm"), Error);
}

TEST_CASE("benchmark on a small toy") {
  const Dataset d = synthetic::step_dataset(50, 3);
  const SplitPlan plan{{stratified_split(d.target(), 0.7, 1)}};
  BenchmarkConfig config;
  const auto r = run_benchmark(d, plan, config);
  REQUIRE(r.splits.size() == 1);
  CHECK_FALSE(r.splits[0].failed);
  for (double a : r.splits[0].auc) CHECK((a >= 0.0 && a <= 1.0));
  CHECK(*r.splits[0].param_count[2] >= 1);
  CHECK(*r.splits[0].param_count[1] == 400);
  CHECK(r.ranks.points[0] + r.ranks.points[1] + r.ranks.points[2] == doctest::Approx(3.0));
}

TEST_CASE("constant external surrogate cascades to an intercept-only model") {
  const Dataset d = synthetic::step_dataset(80, 3);
  const SplitPlan plan{{stratified_split(d.target(), 0.7, 1)}};
  BenchmarkConfig config;
  config.surrogate = SurrogateConfig::parse("external:awk 'NR>1{print 0.5}'");
  const auto r = run_benchmark(d, plan, config);
  CHECK(r.splits[0].auc[1] == 0.5);
  CHECK(*r.splits[0].param_count[2] == 1);
  CHECK_FALSE(r.splits[0].param_count[1].has_value());
  CHECK_FALSE(r.summary[1].mean_param_count.has_value());
}

TEST_CASE("benchmark is reproducible and job independent") {
  const Dataset d = synthetic::step_dataset(300, 6);
  SplitPlan plan;
  for (std::uint64_t s = 0; s < 3; ++s) plan.splits.push_back(stratified_split(d.target(), 0.7, s));
  BenchmarkConfig config;
  config.seed = 11;
  const auto a = run_benchmark(d, plan, config);
  config.jobs = 3;
  const auto b = run_benchmark(d, plan, config);
  const std::vector<BenchmarkResult> ra{a}, rb{b};
  CHECK(report_tsv(ra) == report_tsv(rb));
  CHECK(splits_tsv(ra) == splits_tsv(rb));
  CHECK(tests_tsv(ra) == tests_tsv(rb));
}

TEST_CASE("tuned surrogate records its setting") {
  const Dataset d = synthetic::step_dataset(200, 2);
  const SplitPlan plan{{stratified_split(d.target(), 0.7, 1)}};
  BenchmarkConfig config;
  config.surrogate = SurrogateConfig::parse("gbm-tuned:2");
  config.search_ranges.max_trees = 120;
  const auto r = run_benchmark(d, plan, config);
  REQUIRE(r.splits[0].tuned.has_value());
  CHECK(*r.splits[0].param_count[1] == r.splits[0].tuned->n_trees() * 4);
}

TEST_CASE("failed splits are skipped with a warning") {
  const Dataset d = synthetic::step_dataset(100, 1);
  std::vector<std::size_t> ones, zeros;
  for (std::size_t i = 0; i < 100; ++i) (d.target()[i] ? ones : zeros).push_back(i);
  SplitPlan plan{{stratified_split(d.target(), 0.7, 1), Split{{ones[0], ones[1], ones[2]}, {zeros[0], ones[3]}}}};
  BenchmarkConfig config;
  std::vector<std::string> warnings;
  config.warn = [&](const std::string& m) { warnings.push_back(m); };
  const auto r = run_benchmark(d, plan, config);
  CHECK(r.n_succeeded() == 1);
  CHECK(r.splits[1].failed);
  CHECK(warnings.size() == 1);
  const std::vector<BenchmarkResult> rs{r};
  CHECK(splits_tsv(rs).find("\tfailed\t") != std::string::npos);
}

TEST_CASE("report tables") {
  const Dataset d = synthetic::step_dataset(120, 4);
  const SplitPlan plan{{stratified_split(d.target(), 0.7, 1), stratified_split(d.target(), 0.7, 2)}};
  BenchmarkConfig config;
  config.label = "toy";
  const std::vector<BenchmarkResult> rs{run_benchmark(d, plan, config)};
  const auto report = report_tsv(rs);
  CHECK(report.rfind("dataset\tmodel\tmean_auc\tsd_auc\tmean_param_count\n", 0) == 0);
  CHECK(report.find("toy\tsurrogate\t") != std::string::npos);
  CHECK(barycentric_tsv(rs).find("toy\trefined\t") != std::string::npos);
  CHECK(tradeoff_tsv(rs).rfind("dataset\tmodel\tparam_count\tauc\n", 0) == 0);
  CHECK(tests_tsv(rs).find("surrogate_vs_refined") != std::string::npos);
}
