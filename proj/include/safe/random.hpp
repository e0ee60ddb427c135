#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace safe {

std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream seed for component `stream` under a master seed.
/// Every random consumer in the library derives its generator this way, so
/// results never depend on the order in which work items run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Well-known stream tags. Combined with an index via derive_seed twice.
namespace streams {
inline constexpr std::uint64_t kGbmTree = 0x7472656501ULL;
inline constexpr std::uint64_t kSearchDraws = 0x7365617202ULL;
inline constexpr std::uint64_t kSearchFit = 0x7365617203ULL;
inline constexpr std::uint64_t kBackground = 0x626b677204ULL;
inline constexpr std::uint64_t kSplit = 0x73706c7405ULL;
inline constexpr std::uint64_t kTuneSplit = 0x74756e6506ULL;
inline constexpr std::uint64_t kPlan = 0x706c616e07ULL;
}  // namespace streams

// mt19937_64 output is fixed by the standard; the distributions in <random>
// are not, so the mapping to ranges is done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform real in [0, 1) with 53 random bits.
  double unit();
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 engine_;
};

/// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                    std::size_t k);

}  // namespace safe
