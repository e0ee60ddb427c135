#pragma once

#include <memory>

#include "safe/data.hpp"
#include "safe/random.hpp"
#include "safe/surrogate.hpp"

namespace synthetic {

// Two step effects plus a 4-level categorical whose levels fall into two
// effective groups: eta = 2*[x1>5] + 2*[x2>3] + (-1 for a,b; +1 for c,d).
inline safe::Dataset step_dataset(std::size_t n, std::uint64_t seed) {
  using namespace safe;
  Rng rng(seed);
  auto levels = std::make_shared<const LevelDictionary>(LevelDictionary{"a", "b", "c", "d"});
  NumericColumn x1, x2;
  CategoricalColumn g{{}, levels};
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 10.0), b = rng.uniform(0.0, 10.0);
    const auto level = static_cast<std::int32_t>(rng.below(4));
    const double eta = 2.0 * (a > 5.0) + 2.0 * (b > 3.0) + (level >= 2 ? 1.0 : -1.0);
    x1.values.push_back(a);
    x2.values.push_back(b);
    g.codes.push_back(level);
    y.push_back(rng.unit() < sigmoid(eta) ? 1 : 0);
  }
  Schema schema({{"x1", ColumnKind::Numeric}, {"x2", ColumnKind::Numeric}, {"g", ColumnKind::Categorical}}, "y");
  return Dataset(schema, {x1, x2, g}, y);
}

}  // namespace synthetic
