#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "fedforget/dataset.hpp"
#include "fedforget/mlp.hpp"
#include "fedforget/param_vector.hpp"

namespace fedforget {

/// Which removal objective the compromised participant minimises.
///
///   kNaiveGa:           -CE(trigger)
///   kMemoryPreserve:     CE(benign) - CE(trigger)
///   kPenaltyUnweighted:  CE(benign) - CE(trigger) + gamma * ||theta - theta_G||_1
///   kPenaltyWeighted:    CE(benign) - CE(trigger) + gamma * ||omega * (theta - theta_G)||_1
enum class UnlearnVariant { kNaiveGa, kMemoryPreserve, kPenaltyUnweighted, kPenaltyWeighted };

struct UnlearnPlan {
  UnlearnVariant variant = UnlearnVariant::kPenaltyWeighted;
  double gamma = 3.0;
  std::size_t epochs = 6;
  double lr0 = 5e-4;
  std::size_t lr_decay_every = 2;
  double lr_decay_factor = 10.0;
  std::size_t batch_size = 16;
  double epsilon_importance = 1e-8;
  double omega_clip = 3.0;
  /// Optional: stop once the local model is at chance on D_t and benign
  /// accuracy is within `early_stop_tolerance` of its value at entry.
  bool early_stop = false;
  double early_stop_tolerance = 0.02;

  void validate() const;
  bool uses_penalty() const noexcept {
    return variant == UnlearnVariant::kPenaltyUnweighted ||
           variant == UnlearnVariant::kPenaltyWeighted;
  }
  /// Staircase schedule: lr0 / factor^floor(epoch / every).
  double lr_at(std::size_t epoch) const;
};

struct ImportancePair {
  ParamVector i_benign;   // |grad of mean CE over D_benign|
  ParamVector i_trigger;  // |grad of mean CE over D_t|
  ParamVector omega;      // min(i_benign / (i_trigger + eps), clip)
};

ImportancePair compute_importance(const ParamVector& params, const MlpArchitecture& arch,
                                  const DatasetSlice& benign, const DatasetSlice& trigger,
                                  double epsilon, double clip);
/// The same ratio from precomputed mean-loss gradients of any model.
ImportancePair importance_from_gradients(const ParamVector& grad_benign,
                                         const ParamVector& grad_trigger, double epsilon,
                                         double clip);

struct UnlearnTerms {
  double ce_benign = 0.0;
  double ce_trigger = 0.0;
  double penalty = 0.0;  // gamma already applied
};

/// Loss and gradient of the selected objective. `omega` is required by the
/// weighted variant and treated as a constant; the L1 subgradient at zero is 0.
GradResult unlearn_loss_grad(const ParamVector& params, const MlpArchitecture& arch,
                             std::span<const LabeledExample> benign_batch,
                             std::span<const LabeledExample> trigger_batch,
                             const ParamVector& global, const ParamVector* omega,
                             const UnlearnPlan& plan, UnlearnTerms* terms = nullptr);

struct IterationDiagnostics {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  UnlearnTerms terms;
  double omega_p50 = 0.0;
  double omega_p90 = 0.0;
  double omega_p99 = 0.0;
  std::size_t benign_batch = 0;
  std::size_t trigger_batch = 0;
};
using UnlearnObserver = std::function<void(const IterationDiagnostics&)>;

struct UnlearnOutcome {
  ParamVector local;
  std::size_t steps = 0;
  bool stopped_early = false;
  double acc_trigger_entry = 0.0;
  double acc_trigger_exit = 0.0;
  double acc_benign_entry = 0.0;
  double acc_benign_exit = 0.0;
};

/// Backdoor removal by the compromised participant, starting from `global`.
/// Each epoch is one pass over D_benign in mini-batches; every step pairs a
/// benign batch with a trigger batch of the same nominal size (trigger batches
/// cycle through reshuffled passes over D_t). Importance is recomputed on the
/// full sets before every weighted step.
UnlearnOutcome run_unlearning(const ParamVector& global, const MlpArchitecture& arch,
                              const DatasetSlice& benign, const DatasetSlice& trigger,
                              const UnlearnPlan& plan, std::uint64_t seed,
                              const UnlearnObserver& observer = {});

/// scaled: (n_Sm / n_pc) * (local - global); otherwise local - global.
ParamVector removal_update(const ParamVector& local, const ParamVector& global,
                           std::size_t n_pc, std::size_t n_sm, bool scaled);

}  // namespace fedforget
