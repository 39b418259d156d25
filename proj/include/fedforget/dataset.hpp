#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace fedforget {

enum class ExampleTag : std::uint8_t { kBenign = 0, kTrigger = 1 };

struct LabeledExample {
  std::vector<double> features;
  int label = 0;
  ExampleTag tag = ExampleTag::kBenign;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

/// Ordered examples with a common feature dimension.
struct DatasetSlice {
  std::vector<LabeledExample> examples;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  /// Feature dimension of the first example (0 when empty).
  std::size_t dim() const noexcept {
    return examples.empty() ? 0 : examples.front().features.size();
  }
  std::span<const LabeledExample> view() const noexcept { return examples; }
  /// Throws ArgumentError on mixed feature dimensions.
  void require_homogeneous() const;

  friend bool operator==(const DatasetSlice&, const DatasetSlice&) = default;
};

DatasetSlice concat(const DatasetSlice& a, const DatasetSlice& b);

// ---------------------------------------------------------------------------
// Synthetic task

struct TaskParams {
  int num_classes = 10;
  std::size_t input_dim = 20;
  std::size_t train_size = 10000;
  std::size_t test_size = 2000;
  int subclusters = 4;             // per class
  double class_sep = 3.5;          // scale of the class-mean simplex
  double subcluster_radius = 8.0;  // offset of each subcluster from its class mean
  double noise_sigma = 1.0;        // isotropic within-subcluster std
};

/// Everything needed to re-derive membership and densities of generated data.
struct GeneratorState {
  TaskParams params;
  std::uint64_t seed = 0;
  /// class_means[k] has input_dim entries.
  std::vector<std::vector<double>> class_means;
  /// subcluster_means[k][j] = class mean + subcluster offset.
  std::vector<std::vector<std::vector<double>>> subcluster_means;
  /// Per-class unit direction used for edge-case (tail) sampling.
  std::vector<std::vector<double>> edge_directions;

  /// Index of the most likely subcluster of class `k` for `x`.
  int nearest_subcluster(int k, std::span<const double> x) const;
  /// Mahalanobis distance of x from subcluster (k, j) under sigma^2 I.
  double mahalanobis(int k, int j, std::span<const double> x) const;
};

struct Task {
  DatasetSlice train;
  DatasetSlice test;
  GeneratorState generator;
};

/// Gaussian mixture: one component per class on a scaled simplex, each split
/// into `subclusters` isotropic sub-components. Labels are uniform.
Task generate_task(const TaskParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Trigger sets

enum class TriggerKind { kSemanticSubpopulation, kLabelFlipSubset, kEdgeCase };

struct TriggerFraction {
  double value;
};
struct TriggerCount {
  std::size_t value;
};
using TriggerSize = std::variant<TriggerFraction, TriggerCount>;

struct TriggerSpec {
  TriggerKind kind = TriggerKind::kSemanticSubpopulation;
  int source_class = 1;
  int target_label = 2;
  TriggerSize size = TriggerFraction{1.0};
  /// Subcluster of source_class the trigger lives in; -1 = whole class
  /// (label-flip only).
  int subcluster = 0;
  /// Minimum tail distance, in noise standard deviations (edge case only).
  double tail_threshold = 2.5;
};

struct TriggerSplit {
  DatasetSlice trigger;  // D_t: relabelled to target, tagged trigger
  DatasetSlice clean;    // train minus anything whose features entered D_t
};

TriggerSplit build_trigger_set(const DatasetSlice& train, const TriggerSpec& spec,
                               const GeneratorState& generator, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Partitioning

struct Partition {
  std::vector<DatasetSlice> per_participant;
  std::vector<std::size_t> sizes;
};

/// Shuffle, then split into n contiguous near-equal parts (sizes differ by at
/// most one).
Partition partition_iid(const DatasetSlice& train, std::size_t n, std::uint64_t seed);

}  // namespace fedforget
