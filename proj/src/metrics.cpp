#include "fedforget/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedforget/common.hpp"

namespace fedforget {

double acc_backdoor(const ParamVector& params, const MlpArchitecture& arch,
                    const DatasetSlice& trigger) {
  if (trigger.empty()) throw ArgumentError("acc_backdoor: empty trigger set");
  const int target = trigger.examples.front().label;
  for (const auto& ex : trigger.examples) {
    if (ex.label != target) throw ArgumentError("acc_backdoor: trigger labels differ");
  }
  const auto pred = predict_all(params, arch, trigger.view());
  const auto hits = std::count(pred.begin(), pred.end(), target);
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double update_l2(const ParamVector& local, const ParamVector& global) {
  return l2_distance(local, global);
}

void MetricSeries::push(long round, double value) {
  if (!values.empty() && round <= values.back().first) {
    throw ArgumentError("metric series rounds must be strictly increasing");
  }
  values.emplace_back(round, value);
}

SeedEnsemble ensemble_stats(std::span<const MetricSeries> runs) {
  SeedEnsemble out;
  if (runs.empty()) return out;
  const auto& grid = runs.front().values;
  for (const auto& r : runs) {
    if (r.values.size() != grid.size()) throw ArgumentError("ensemble: round grids differ");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (r.values[i].first != grid[i].first) throw ArgumentError("ensemble: round grids differ");
    }
  }
  out.runs = runs.size();
  const double k = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    // Shifted by the first run so identical runs give exactly zero spread.
    const double x0 = runs.front().values[i].second;
    double s = 0.0;
    for (const auto& r : runs) s += r.values[i].second - x0;
    const double shift = s / k;
    const double m = x0 + shift;
    double v = 0.0;
    for (const auto& r : runs) {
      const double d = (r.values[i].second - x0) - shift;
      v += d * d;
    }
    out.rounds.push_back(grid[i].first);
    out.mean.push_back(m);
    out.stddev.push_back(std::sqrt(v / k));
  }
  return out;
}

bool trend_test(std::span<const double> xs, std::span<const double> ys,
                TrendDirection direction, double delta) {
  if (xs.size() != ys.size()) throw ArgumentError("trend_test: length mismatch");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double prev = ys[order[i - 1]];
    const double cur = ys[order[i]];
    if (direction == TrendDirection::kDecreasing && cur > prev + delta) return false;
    if (direction == TrendDirection::kIncreasing && cur < prev - delta) return false;
  }
  return true;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace fedforget
