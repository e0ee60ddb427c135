#include <algorithm>
#include <cmath>
#include <limits>

#include "safe/error.hpp"
#include "safe/extraction.hpp"
#include "safe/metrics.hpp"
#include "safe/util.hpp"

namespace safe {

namespace {

// Profiles whose range is below this fraction of their magnitude are flat.
constexpr double kFlatTolerance = 1e-12;

}  // namespace

PenaltySpec PenaltySpec::parse(const std::string& text) {
  if (text == "mbic") return mbic();
  const std::string prefix = "const:";
  if (text.rfind(prefix, 0) == 0) {
    double lambda = 0.0;
    if (!parse_double(text.substr(prefix.size()), lambda) || lambda < 0.0)
      throw Error(ErrorCode::InvalidArgument, "bad penalty constant in '" + text + "'");
    return constant(lambda);
  }
  throw Error(ErrorCode::InvalidArgument, "penalty must be 'mbic' or 'const:<float>', got '" + text + "'");
}

std::string PenaltySpec::to_string() const {
  return mode == Mode::Mbic ? std::string("mbic") : "const:" + format_double(lambda);
}

double estimate_sigma(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  std::vector<double> diffs;
  diffs.reserve(values.size() - 1);
  for (std::size_t i = 1; i < values.size(); ++i) diffs.push_back(std::abs(values[i] - values[i - 1]));
  const double robust = median(diffs) / (0.6745 * std::sqrt(2.0));
  if (robust > 0.0) return robust;
  double sum_sq = 0.0;
  for (double d : diffs) sum_sq += d * d;
  return std::sqrt(sum_sq / static_cast<double>(diffs.size()) / 2.0);
}

namespace {

// rss[s][t]: within-segment sum of squares for values[s..t] (inclusive),
// accumulated with Welford updates for stability.
std::vector<std::vector<double>> segment_rss(std::span<const double> values) {
  const std::size_t m = values.size();
  std::vector<std::vector<double>> rss(m, std::vector<double>(m, 0.0));
  for (std::size_t s = 0; s < m; ++s) {
    double mean = 0.0, ss = 0.0;
    for (std::size_t t = s; t < m; ++t) {
      const double count = static_cast<double>(t - s + 1);
      const double delta = values[t] - mean;
      mean += delta / count;
      ss += delta * (values[t] - mean);
      rss[s][t] = std::max(ss, 0.0);
    }
  }
  return rss;
}

double changepoint_penalty(const PenaltySpec& penalty, std::size_t m) {
  return penalty.mode == PenaltySpec::Mode::Mbic ? 1.5 * std::log(static_cast<double>(m)) : penalty.lambda;
}

double length_term(const PenaltySpec& penalty, std::size_t length, std::size_t m) {
  if (penalty.mode != PenaltySpec::Mode::Mbic) return 0.0;
  return 0.5 * std::log(static_cast<double>(length) / static_cast<double>(m));
}

void check_segmentation(const Segmentation& seg, std::size_t m) {
  for (std::size_t i = 0; i < seg.changepoints.size(); ++i) {
    const auto cp = seg.changepoints[i];
    if (cp + 1 >= m) throw Error(ErrorCode::InvalidArgument, "changepoint index out of range");
    if (i && seg.changepoints[i - 1] >= cp)
      throw Error(ErrorCode::InvalidArgument, "changepoints must be strictly ascending");
  }
}

}  // namespace

double segmentation_cost(std::span<const double> values, const Segmentation& seg,
                         const PenaltySpec& penalty, double sigma) {
  const std::size_t m = values.size();
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "empty series");
  check_segmentation(seg, m);
  const double scale = 1.0 / (2.0 * sigma * sigma);
  double cost = changepoint_penalty(penalty, m) * static_cast<double>(seg.changepoints.size());
  std::size_t start = 0;
  auto add_segment = [&](std::size_t end) {
    double mean = 0.0;
    for (std::size_t t = start; t <= end; ++t) mean += values[t];
    mean /= static_cast<double>(end - start + 1);
    double rss = 0.0;
    for (std::size_t t = start; t <= end; ++t) rss += (values[t] - mean) * (values[t] - mean);
    cost += rss * scale + length_term(penalty, end - start + 1, m);
    start = end + 1;
  };
  for (auto cp : seg.changepoints) add_segment(cp);
  add_segment(m - 1);
  return cost;
}

Segmentation detect_changepoints(std::span<const double> values, const PenaltySpec& penalty) {
  const std::size_t m = values.size();
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "empty series");
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite profile value");
  if (penalty.mode == PenaltySpec::Mode::Constant && !(penalty.lambda >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "penalty constant must be non-negative");

  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double magnitude = std::max({1.0, std::abs(*lo), std::abs(*hi)});
  const bool constant = *hi - *lo <= kFlatTolerance * magnitude;
  const double sigma = penalty.sigma ? *penalty.sigma : estimate_sigma(values);
  if (m < 2 || constant || !(sigma > 0.0)) return {};

  const auto rss = segment_rss(values);
  const double scale = 1.0 / (2.0 * sigma * sigma);
  const double beta = changepoint_penalty(penalty, m);

  // best[t]: optimal cost of values[0..t-1]; last[t]: start of its final segment.
  std::vector<double> best(m + 1, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> last(m + 1, 0);
  best[0] = 0.0;
  for (std::size_t t = 1; t <= m; ++t) {
    for (std::size_t s = 0; s < t; ++s) {
      const double candidate = best[s] + (s > 0 ? beta : 0.0) + rss[s][t - 1] * scale +
                               length_term(penalty, t - s, m);
      if (candidate < best[t]) {
        best[t] = candidate;
        last[t] = s;
      }
    }
  }

  Segmentation seg;
  for (std::size_t t = m; last[t] > 0; t = last[t]) seg.changepoints.push_back(last[t] - 1);
  std::reverse(seg.changepoints.begin(), seg.changepoints.end());
  return seg;
}

std::vector<double> segmentation_to_cutpoints(std::span<const double> grid, const Segmentation& seg) {
  check_segmentation(seg, grid.size());
  std::vector<double> cuts;
  cuts.reserve(seg.changepoints.size());
  for (auto cp : seg.changepoints) cuts.push_back(0.5 * (grid[cp] + grid[cp + 1]));
  return cuts;
}

}  // namespace safe
