#include "fedforget/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedforget/common.hpp"
#include "fedforget/fl.hpp"

namespace fedforget {

void AttackPlan::validate() const {
  if (poison_epochs < 1) throw ArgumentError("attack.poison_epochs must be >= 1");
  if (!(poison_lr > 0.0) || !std::isfinite(poison_lr)) {
    throw ArgumentError("attack.poison_lr must be positive");
  }
  if (batch_size == 0) throw ArgumentError("attack.batch_size must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("attack.alpha must be in (0, 1]");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw ArgumentError("attack.mask_ratio must be in (0, 1)");
  }
}

DatasetSlice craft_poisoned_slice(const DatasetSlice& benign, const DatasetSlice& trigger,
                                  std::uint64_t seed) {
  if (trigger.empty()) throw ArgumentError("craft_poisoned_slice: empty trigger set");
  DatasetSlice d = concat(benign, trigger);
  Rng rng = make_rng(seed, Stream::kAdversary);
  std::shuffle(d.examples.begin(), d.examples.end(), rng);
  return d;
}

std::vector<std::uint8_t> trainable_mask(const ParamVector& global,
                                         const MlpArchitecture& arch,
                                         const DatasetSlice& benign, double mask_ratio) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw ArgumentError("mask_ratio must be in (0, 1)");
  }
  const auto g = forward_loss_grad(global, arch, benign.view());
  const std::size_t n = global.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(g.grad[a]) < std::abs(g.grad[b]);
  });
  const auto keep = static_cast<std::size_t>(std::llround(mask_ratio * static_cast<double>(n)));
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
  return mask;
}

ParamVector train_malicious(const ParamVector& global, const MlpArchitecture& arch,
                            const DatasetSlice& poisoned, const DatasetSlice& benign,
                            const AttackPlan& plan, std::uint64_t seed) {
  plan.validate();
  if (poisoned.empty()) throw ArgumentError("train_malicious: empty poisoned slice");
  std::vector<std::uint8_t> mask;
  if (plan.method == AttackMethod::kNeurotoxinMask) {
    mask = trainable_mask(global, arch, benign, plan.mask_ratio);
  }
  ParamVector local = global;
  Rng rng = make_rng(seed, Stream::kAdversary, 1);
  for (std::size_t e = 0; e < plan.poison_epochs; ++e) {
    for (const auto& idx : shuffled_batches(poisoned.size(), plan.batch_size, rng)) {
      const auto batch = gather(poisoned, idx);
      auto g = forward_loss_grad(local, arch, batch).grad;
      if (plan.method == AttackMethod::kConstrainAndScale) {
        if (plan.alpha < 1.0) {
          g *= plan.alpha;
          const double pull = 2.0 * (1.0 - plan.alpha);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += pull * (local[i] - global[i]);
        }
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!mask[i]) g[i] = 0.0;
        }
      }
      local.axpy(-plan.poison_lr, g);
    }
  }
  return local;
}

ParamVector replacement_update(const ParamVector& local, const ParamVector& global,
                               std::size_t n_pc, std::size_t n_sm) {
  if (n_pc == 0 || n_sm == 0) throw ArgumentError("replacement_update: zero dataset size");
  const double scale = static_cast<double>(n_sm) / static_cast<double>(n_pc);
  ParamVector u = local - global;
  if (scale != 1.0) u *= scale;
  return u;
}

}  // namespace fedforget
