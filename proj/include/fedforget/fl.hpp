#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedforget/common.hpp"
#include "fedforget/dataset.hpp"
#include "fedforget/mlp.hpp"
#include "fedforget/param_vector.hpp"

namespace fedforget {

// ---------------------------------------------------------------------------
// Mini-batching shared by every local trainer.

/// Shuffled index batches covering [0, count) once; the last batch may be short.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t count,
                                                       std::size_t batch_size, Rng& rng);
std::vector<LabeledExample> gather(const DatasetSlice& slice,
                                   std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Participant selection

enum class SelectionKind { kContinuous, kFixedFrequency, kRandom };

struct SelectionPolicy {
  SelectionKind kind = SelectionKind::kRandom;
  std::size_t m = 10;
  std::size_t f = 10;  // fixed-frequency period
  std::uint64_t seed = 0;

  void validate(std::size_t n) const;
};

/// Ascending participant ids chosen for `round`. Deterministic per
/// (policy.seed, round).
std::vector<std::size_t> select_participants(const SelectionPolicy& policy,
                                             std::uint64_t round, std::size_t n,
                                             std::size_t compromised_id);

// ---------------------------------------------------------------------------
// Benign local training

struct LocalTrainConfig {
  std::size_t epochs = 2;
  double lr = 0.1;
  std::size_t batch_size = 16;
};

/// Shuffled mini-batch SGD from `global`; returns the full local model.
ParamVector local_train(const ParamVector& global, const MlpArchitecture& arch,
                        const DatasetSlice& slice, const LocalTrainConfig& cfg,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Aggregation

struct DefenseConfig {
  double noise_sigma = 0.0;  // std of zero-mean Gaussian noise per update entry
  std::uint64_t seed = 0;
};

struct ClientUpdate {
  std::size_t id = 0;
  ParamVector update;  // local - global, or whatever the client chose to send
  std::size_t n = 0;   // reported local dataset size
};

/// FedAvg: global + sum_i (n_i / n_S) * update_i, reduced in ascending id order.
/// With noise_sigma > 0 each update is perturbed before weighting.
ParamVector fedavg_aggregate(const ParamVector& global, std::vector<ClientUpdate> updates,
                             const DefenseConfig& defense, std::uint64_t round);

}  // namespace fedforget
