#include <cmath>

#include "doctest.h"
#include "safe/error.hpp"
#include "safe/glassbox.hpp"
#include "safe/metrics.hpp"
#include "safe/surrogate.hpp"
#include "synthetic.hpp"

using namespace safe;

namespace {

Dataset line_data(std::vector<double> x, std::vector<std::uint8_t> y) {
  return Dataset(Schema({{"a", ColumnKind::Numeric}}, "y"), {NumericColumn{std::move(x)}}, std::move(y));
}

double train_log_loss(const GbmModel& m, const Dataset& d, std::size_t k) {
  const auto raw = m.raw_scores(d, k);
  double loss = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double p = sigmoid(raw[i]);
    loss -= d.target()[i] ? std::log(p) : std::log(1.0 - p);
  }
  return loss / static_cast<double>(raw.size());
}

std::vector<FeatureInfo> single_numeric() { return {FeatureInfo{"a", ColumnKind::Numeric, {}}}; }

}  // namespace

TEST_CASE("hyperparameter validation") {
  CHECK_THROWS_AS(GbmHyperparams(0, 0.1, 0.5), Error);
  CHECK_THROWS_AS(GbmHyperparams(10, 0.0, 0.5), Error);
  CHECK_THROWS_AS(GbmHyperparams(10, 0.1, 1.5), Error);
  const GbmHyperparams defaults;
  CHECK(defaults.n_trees() == 100);
  CHECK(defaults.shrinkage() == 0.1);
  CHECK(defaults.bag_fraction() == 0.5);
  CHECK(GbmHyperparams::interaction_depth() == 1);
}

TEST_CASE("balanced target gives zero init score") {
  const Dataset d = line_data({1, 2, 3, 4}, {0, 1, 0, 1});
  CHECK(fit_gbm(d, GbmHyperparams(3, 0.1, 1.0), 1).init_score() == 0.0);
}

TEST_CASE("single boosting step matches a hand computation") {
  // p = 0.5 everywhere, residuals -0.5,-0.5,0.5,0.5, hessians 0.25.
  // Left leaf: -1 / 0.5 = -2, right +2, times shrinkage 0.1.
  const Dataset d = line_data({1, 2, 3, 4}, {0, 0, 1, 1});
  const GbmModel m = fit_gbm(d, GbmHyperparams(1, 0.1, 1.0), 7);
  REQUIRE(m.trees().size() == 1);
  const auto& stump = m.trees()[0];
  REQUIRE(std::holds_alternative<NumericSplit>(stump.split));
  CHECK(std::get<NumericSplit>(stump.split).threshold == 2.5);
  CHECK(stump.left_value == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(stump.right_value == doctest::Approx(0.2).epsilon(1e-15));
  const auto p = m.predict(d);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(0.2))));
  CHECK(p[3] == doctest::Approx(1.0 / (1.0 + std::exp(-0.2))));
}

TEST_CASE("leaf values are clamped") {
  // One row per side makes the Newton step 0.5/0.25 = 2 per unit; a tiny
  // hessian from an extreme init pushes past 4.
  const Dataset d = line_data({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20},
                              {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1});
  const GbmModel m = fit_gbm(d, GbmHyperparams(1, 1.0, 1.0), 1);
  CHECK(m.trees()[0].right_value == 4.0);
  CHECK(std::abs(m.trees()[0].left_value) <= 4.0);
}

TEST_CASE("single class target is rejected") {
  CHECK_THROWS_AS(fit_gbm(line_data({1, 2}, {1, 1}), GbmHyperparams(), 1), Error);
}

TEST_CASE("fit is deterministic and seed dependent") {
  const Dataset d = synthetic::step_dataset(400, 3);
  const GbmModel a = fit_gbm(d, GbmHyperparams(), 5), b = fit_gbm(d, GbmHyperparams(), 5);
  CHECK(a == b);
  CHECK(a.to_json_text() == b.to_json_text());
  CHECK_FALSE(a == fit_gbm(d, GbmHyperparams(), 6));
  CHECK(param_count(a) == 400);
}

TEST_CASE("training loss is non-increasing without bagging") {
  const Dataset d = synthetic::step_dataset(300, 8);
  const GbmModel m = fit_gbm(d, GbmHyperparams(40, 0.3, 1.0), 1);
  double previous = train_log_loss(m, d, 0);
  for (std::size_t k = 1; k <= 40; ++k) {
    const double loss = train_log_loss(m, d, k);
    CHECK(loss <= previous + 1e-12);
    previous = loss;
  }
}

TEST_CASE("predictions stay inside (0,1)") {
  const Dataset d = synthetic::step_dataset(300, 1);
  for (double p : fit_gbm(d, GbmHyperparams(200, 0.6, 0.5), 2).predict(d)) CHECK((p > 0.0 && p < 1.0));
}

TEST_CASE("hand-built models") {
  const Dataset d = line_data({1, 3}, {0, 1});
  CHECK(GbmModel(0.0, {}, GbmHyperparams(), single_numeric()).predict(d) == std::vector<double>{0.5, 0.5});
  const GbmModel stump(0.0, {Stump{0, NumericSplit{2.5}, -1.0, 1.0}}, GbmHyperparams(1, 0.1, 0.5), single_numeric());
  const auto p = stump.predict(d);
  CHECK(p[0] == doctest::Approx(0.2689414213699951));
  CHECK(p[1] == doctest::Approx(0.7310585786300049));
  const GbmModel with_zero(0.0, {Stump{0, NumericSplit{2.5}, -1.0, 1.0}, Stump{0, NumericSplit{1.5}, 0.0, 0.0}},
                           GbmHyperparams(2, 0.1, 0.5), single_numeric());
  CHECK(with_zero.predict(d) == p);
}

TEST_CASE("categorical stumps and unknown levels") {
  const Dataset d = synthetic::step_dataset(500, 4);
  const GbmModel m = fit_gbm(d, GbmHyperparams(), 1);
  bool saw_categorical = false;
  for (const auto& t : m.trees()) saw_categorical |= std::holds_alternative<CategoricalSplit>(t.split);
  CHECK(saw_categorical);

  auto other = std::make_shared<const LevelDictionary>(LevelDictionary{"a", "zzz"});
  const Dataset odd(d.schema(), {NumericColumn{{1.0}}, NumericColumn{{1.0}}, CategoricalColumn{{1}, other}}, {1});
  try {
    m.predict(odd);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLevel);
    CHECK(std::string(e.what()).find("zzz") != std::string::npos);
  }
  // Levels are matched by name, not code.
  const Dataset renamed(d.schema(), {NumericColumn{{1.0}}, NumericColumn{{1.0}}, CategoricalColumn{{0}, other}}, {1});
  CHECK(m.predict(renamed).size() == 1);
}

TEST_CASE("schema mismatch") {
  const GbmModel m = fit_gbm(line_data({1, 2, 3, 4}, {0, 0, 1, 1}), GbmHyperparams(2, 0.1, 1.0), 1);
  const Dataset d(Schema({{"b", ColumnKind::Numeric}}, "y"), {NumericColumn{{1.0}}}, {0});
  CHECK_THROWS_AS(m.predict(d), Error);
}

TEST_CASE("model json round trip and version check") {
  const Dataset d = synthetic::step_dataset(200, 2);
  const GbmModel m = fit_gbm(d, GbmHyperparams(20, 0.2, 0.5), 3);
  const GbmModel back = GbmModel::from_json_text(m.to_json_text());
  CHECK(back == m);
  CHECK(back.predict(d) == m.predict(d));
  std::string text = m.to_json_text();
  text.replace(text.find("\"format\": 1"), 11, "\"format\": 9");
  try {
    GbmModel::from_json_text(text);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatVersionMismatch);
  }
  try {
    GbmModel::from_json_text(m.to_json_text().substr(0, 100));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptFile);
  }
}

TEST_CASE("random search") {
  const Dataset train = synthetic::step_dataset(300, 1), valid = synthetic::step_dataset(150, 2);
  GbmSearchRanges ranges;
  ranges.max_trees = 200;
  const auto a = random_search_gbm(train, valid, ranges, 3, 9), b = random_search_gbm(train, valid, ranges, 3, 9, 3);
  CHECK(a.hyperparams == b.hyperparams);
  CHECK(a.model == b.model);
  CHECK(a.draw_index < 3);
  CHECK(a.validation_auc == doctest::Approx(auc(a.model.predict(valid), valid.target())));
  for (std::size_t n : {std::size_t{1}, std::size_t{2}}) {
    const auto r = random_search_gbm(train, valid, ranges, n, 9);
    CHECK(r.hyperparams.n_trees() >= 50);
    CHECK(r.hyperparams.n_trees() <= 200);
    CHECK(r.hyperparams.shrinkage() >= 0.01);
    CHECK(r.hyperparams.shrinkage() <= 0.6);
    CHECK(r.hyperparams.bag_fraction() >= 0.2);
    CHECK(r.hyperparams.bag_fraction() <= 0.7);
  }
  CHECK(random_search_gbm(train, valid, ranges, 1, 9).draw_index == 0);

  GbmSearchRanges point{100, 100, 0.1, 0.1, 0.5, 0.5};
  const auto collapsed = random_search_gbm(train, valid, point, 1, 4);
  CHECK(collapsed.hyperparams == GbmHyperparams(100, 0.1, 0.5));
}

TEST_CASE("external surrogate protocol") {
  const Dataset d = synthetic::step_dataset(20, 1);
  const auto constant = make_external("awk 'NR>1{print 0.5}'");
  CHECK(constant->score(d) == std::vector<double>(20, 0.5));

  // Echo back x1 to check column order and row order.
  const auto echo = make_external("awk -F, 'NR>1{print $1}'");
  const auto scores = echo->score(d);
  for (std::size_t i = 0; i < 20; ++i) CHECK(scores[i] == d.numeric(0).values[i]);

  auto code = [&](const std::string& cmd) {
    try {
      make_external(cmd)->score(d);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code("awk 'NR>2{print 0.5}'") == ErrorCode::ExternalProtocolError);
  CHECK(code("awk 'NR>1{print \"x\"}'") == ErrorCode::ExternalProtocolError);
  CHECK(code("cat >/dev/null; exit 3") == ErrorCode::ExternalProtocolError);
  CHECK(code("true") == ErrorCode::ExternalProtocolError);
  CHECK(code("/nonexistent/binary") == ErrorCode::ExternalProtocolError);
}
