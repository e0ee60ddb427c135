#include <filesystem>

#include "doctest.h"
#include "safe/data.hpp"
#include "safe/error.hpp"
#include "safe/random.hpp"
#include "safe/util.hpp"
#include "synthetic.hpp"

using namespace safe;

namespace {

Schema ab_schema() { return Schema({{"a", ColumnKind::Numeric}, {"b", ColumnKind::Categorical}}, "y"); }

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("schema validation and json round trip") {
  CHECK(code_of([] { Schema({{"a", ColumnKind::Numeric}, {"a", ColumnKind::Numeric}}, "y"); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([] { Schema({{"a", ColumnKind::Numeric}}, "a"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { Schema({}, "y"); }) == ErrorCode::InvalidArgument);
  const Schema s = ab_schema();
  CHECK(Schema::from_json_text(s.to_json_text()) == s);
  CHECK(s.index_of("b") == 1);
  CHECK_FALSE(s.index_of("y").has_value());
  CHECK(s.fingerprint() != Schema({{"a", ColumnKind::Categorical}, {"b", ColumnKind::Categorical}}, "y").fingerprint());
}

TEST_CASE("load csv basic example") {
  const Dataset d = parse_csv("a,b,y\n1.5,red,1\n2.0,blue,0\n", ab_schema());
  CHECK(d.n_rows() == 2);
  CHECK(*d.categorical(1).levels == LevelDictionary{"red", "blue"});
  CHECK(d.target() == std::vector<std::uint8_t>{1, 0});
  CHECK(d.numeric(0).values == std::vector<double>{1.5, 2.0});
}

TEST_CASE("csv parse error names row and column") {
  try {
    parse_csv("a,b,y\nx,red,1\n", ab_schema());
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 1);
    CHECK(e.column() == "a");
  }
}

TEST_CASE("string target labels map lexicographically") {
  const Dataset d = parse_csv("a,b,y\n1,r,yes\n2,r,no\n3,s,yes\n", ab_schema());
  CHECK(d.target() == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(code_of([] { parse_csv("a,b,y\n1,r,yes\n2,r,no\n3,s,maybe\n", ab_schema()); }) == ErrorCode::NonBinaryTarget);
  CHECK(parse_csv("a,b,y\n1,r,2\n2,r,0\n", ab_schema()).target() == std::vector<std::uint8_t>{1, 0});
  CHECK(code_of([] { parse_csv("a,b,y\n1,r,1\n2,r,0\n3,r,2\n", ab_schema()); }) == ErrorCode::NonBinaryTarget);
}

TEST_CASE("csv header in any order, missing column and missing value") {
  const Dataset d = parse_csv("y,b,extra,a\n1,red,zz,3\n0,blue,zz,4\n", ab_schema());
  CHECK(d.numeric(0).values == std::vector<double>{3, 4});
  CHECK(code_of([] { parse_csv("a,y\n1,1\n", ab_schema()); }) == ErrorCode::MissingColumn);
  CHECK(code_of([] { parse_csv("a,b,y\n,red,1\n", ab_schema()); }) == ErrorCode::MissingValue);
  CHECK(code_of([] { parse_csv("a,b,y\nNA,red,1\n", ab_schema()); }) == ErrorCode::MissingValue);
  CHECK(code_of([] { parse_csv("a,b,y\n1,red\n", ab_schema()); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_csv("a,b,y\ninf,red,1\n", ab_schema()); }) == ErrorCode::ParseError);
}

TEST_CASE("numeric parsing accepts integers, decimals and exponents") {
  const Dataset d = parse_csv("a,b,y\n-3,r,0\n1e-3,r,1\n+2.50,r,1\n", ab_schema());
  CHECK(d.numeric(0).values == std::vector<double>{-3, 0.001, 2.5});
}

TEST_CASE("csv round trip reproduces the dataset") {
  const Dataset d = synthetic::step_dataset(200, 5);
  const Dataset back = parse_csv(to_csv(d), d.schema());
  CHECK(back.numeric(0).values == d.numeric(0).values);
  CHECK(back.numeric(1).values == d.numeric(1).values);
  CHECK(back.target() == d.target());
  for (std::size_t r = 0; r < d.n_rows(); ++r)
    CHECK(back.categorical(2).level_name(r) == d.categorical(2).level_name(r));
  CHECK(parse_csv(to_csv(back), d.schema()) == back);
}

TEST_CASE("subset") {
  const Dataset d = parse_csv("a,b,y\n1.5,red,1\n2.0,blue,0\n", ab_schema());
  const std::vector<std::size_t> all{0, 1}, one{1}, bad{5};
  CHECK(subset(d, all) == d);
  const Dataset s = subset(d, one);
  CHECK(s.n_rows() == 1);
  CHECK(s.numeric(0).values[0] == 2.0);
  CHECK(s.categorical(1).level_name(0) == "blue");
  CHECK(s.categorical(1).levels == d.categorical(1).levels);
  CHECK(code_of([&] { subset(d, bad); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("subset composes") {
  const Dataset d = synthetic::step_dataset(50, 9);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> a, b;
    for (int i = 0; i < 30; ++i) a.push_back(rng.below(50));
    for (int i = 0; i < 15; ++i) b.push_back(rng.below(30));
    std::vector<std::size_t> ab;
    for (auto i : b) ab.push_back(a[i]);
    CHECK(subset(subset(d, a), b) == subset(d, ab));
  }
}

TEST_CASE("split files") {
  CHECK(parse_splits(R"([{"train":[0,1,2],"test":[3]}])", 4).splits.size() == 1);
  CHECK(code_of([] { parse_splits(R"([{"train":[0,1],"test":[1,2]}])", 4); }) == ErrorCode::OverlappingSplit);
  CHECK(code_of([] { parse_splits(R"([{"train":[0,9],"test":[1]}])", 4); }) == ErrorCode::IndexOutOfRange);
  CHECK(code_of([] { parse_splits(R"([{"train":[0,0],"test":[1]}])", 4); }) == ErrorCode::OverlappingSplit);

  const Dataset d = parse_csv("a,b,y\n1,r,1\n2,r,1\n3,r,0\n4,r,0\n", ab_schema());
  SplitPlan single_class{{Split{{0, 1}, {2, 3}}}};
  CHECK(code_of([&] { validate_split_plan(single_class, 4, &d); }) == ErrorCode::DegenerateTrainPartition);
  SplitPlan ok{{Split{{0, 2}, {1, 3}}}};
  validate_split_plan(ok, 4, &d);
}

TEST_CASE("stratified split keeps both classes and is seeded") {
  const Dataset d = synthetic::step_dataset(300, 2);
  const Split a = stratified_split(d.target(), 0.7, 11), b = stratified_split(d.target(), 0.7, 11);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.test.size() == 300);
  CHECK(subset(d, a.train).has_both_classes());
  CHECK(subset(d, a.test).has_both_classes());
  SplitPlan plan{{a}};
  validate_split_plan(plan, 300, &d);
}

TEST_CASE("missing files") {
  CHECK(code_of([] { load_csv("/nonexistent/file.csv", ab_schema()); }) == ErrorCode::FileNotFound);
  CHECK(code_of([] { Schema::from_json_file("/nonexistent/schema.json"); }) == ErrorCode::FileNotFound);
}

TEST_CASE("format and parse doubles") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12.0, -2.5e17}) {
    double back = 0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
  CHECK(format_double(12.0) == "12");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "Inf");
  double x = 0;
  CHECK_FALSE(parse_double("1.5x", x));
  CHECK_FALSE(parse_double("", x));
  CHECK_FALSE(parse_double("nan", x));
}

TEST_CASE("seed derivation and sampling") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  Rng rng(3);
  auto s = sample_without_replacement(rng, 10, 10);
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(s[i] == i);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.unit();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(7) < 7);
  }
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 5) throw std::runtime_error("x"); }),
                  std::runtime_error);
}
