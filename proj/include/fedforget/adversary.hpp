#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedforget/dataset.hpp"
#include "fedforget/mlp.hpp"
#include "fedforget/param_vector.hpp"

namespace fedforget {

/// Backdoor insertion analogs.
///
/// kConstrainAndScale: SGD on alpha * CE(D) + (1 - alpha) * ||theta - theta_G||^2,
///   i.e. poisoned training held close to the global model, then scaled.
/// kNeurotoxinMask: only the mask_ratio fraction of coordinates with the
///   smallest benign-gradient magnitude at theta_G may move; the rest stay
///   frozen at theta_G.
enum class AttackMethod { kConstrainAndScale, kNeurotoxinMask };
enum class ScaleMode { kFullReplacement, kNone };

struct AttackPlan {
  AttackMethod method = AttackMethod::kConstrainAndScale;
  std::size_t poison_epochs = 5;
  double poison_lr = 0.05;
  std::size_t batch_size = 16;
  double alpha = 0.7;
  double mask_ratio = 0.5;
  ScaleMode scale_mode = ScaleMode::kFullReplacement;

  void validate() const;
};

/// D = D_pc followed by D_t, shuffled with `seed`.
DatasetSlice craft_poisoned_slice(const DatasetSlice& benign, const DatasetSlice& trigger,
                                  std::uint64_t seed);

/// 1 for coordinates the masked attack may update. Exactly
/// round(mask_ratio * size) entries are set: the smallest |grad CE(D_pc)| at
/// `global`, ties to the lower index.
std::vector<std::uint8_t> trainable_mask(const ParamVector& global,
                                         const MlpArchitecture& arch,
                                         const DatasetSlice& benign, double mask_ratio);

/// Poisoned local model initialised from `global`. `benign` is D_pc, used by
/// the masked attack to pick its coordinates.
ParamVector train_malicious(const ParamVector& global, const MlpArchitecture& arch,
                            const DatasetSlice& poisoned, const DatasetSlice& benign,
                            const AttackPlan& plan, std::uint64_t seed);

/// (n_Sm / n_pc) * (local - global): after FedAvg weighting the adversary's
/// contribution is exactly local - global.
ParamVector replacement_update(const ParamVector& local, const ParamVector& global,
                               std::size_t n_pc, std::size_t n_sm);

}  // namespace fedforget
