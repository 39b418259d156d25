#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedforget/dataset.hpp"
#include "fedforget/mlp.hpp"
#include "fedforget/param_vector.hpp"

namespace fedforget {

/// Fraction of D_t predicted as its (shared) target label.
double acc_backdoor(const ParamVector& params, const MlpArchitecture& arch,
                    const DatasetSlice& trigger);

/// ||local - global||_2.
double update_l2(const ParamVector& local, const ParamVector& global);

struct MetricSeries {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::pair<long, double>> values;  // (round, value), rounds increasing

  void push(long round, double value);
};

struct SeedEnsemble {
  std::vector<long> rounds;
  std::vector<double> mean;
  std::vector<double> stddev;  // population std over seeds
  std::size_t runs = 0;
};

/// Per-round mean/std; all series must share the same round grid.
SeedEnsemble ensemble_stats(std::span<const MetricSeries> runs);

enum class TrendDirection { kIncreasing, kDecreasing };

/// Weak monotonicity of ys ordered by xs, allowing each consecutive step to
/// move against the direction by at most `delta`.
bool trend_test(std::span<const double> xs, std::span<const double> ys,
                TrendDirection direction, double delta = 0.01);

double mean(std::span<const double> v);
double stddev(std::span<const double> v);

}  // namespace fedforget
