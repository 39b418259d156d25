#include "fedforget/fl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fedforget {

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t count,
                                                       std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ArgumentError("batch_size must be positive");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t pos = 0; pos < count; pos += batch_size) {
    const std::size_t end = std::min(count, pos + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<LabeledExample> gather(const DatasetSlice& slice,
                                   std::span<const std::size_t> indices) {
  std::vector<LabeledExample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(slice.examples.at(i));
  return out;
}

void SelectionPolicy::validate(std::size_t n) const {
  if (m < 1 || m > n) {
    throw ArgumentError("selection needs 1 <= m <= n (m=" + std::to_string(m) +
                        ", n=" + std::to_string(n) + ")");
  }
  if (f < 1) throw ArgumentError("selection frequency f must be >= 1");
}

std::vector<std::size_t> select_participants(const SelectionPolicy& policy,
                                             std::uint64_t round, std::size_t n,
                                             std::size_t compromised_id) {
  policy.validate(n);
  if (compromised_id >= n) throw ArgumentError("compromised_id out of range");
  Rng rng = make_rng(policy.seed, Stream::kSelection, round);

  bool force = false;
  switch (policy.kind) {
    case SelectionKind::kContinuous:
      force = true;
      break;
    case SelectionKind::kFixedFrequency:
      force = round % policy.f == 0;
      break;
    case SelectionKind::kRandom:
      break;
  }

  // Fixed-frequency rounds without the adversary draw only benign ids, so its
  // participation count is exactly one per period.
  const bool exclude = policy.kind != SelectionKind::kRandom;
  std::vector<std::size_t> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (exclude && i == compromised_id) continue;
    pool.push_back(i);
  }
  std::vector<std::size_t> chosen;
  if (force) chosen.push_back(compromised_id);
  const std::size_t need = policy.m - chosen.size();
  if (need > pool.size()) throw ArgumentError("not enough benign participants");
  for (std::size_t k = 0; k < need; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
    chosen.push_back(pool[k]);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

ParamVector local_train(const ParamVector& global, const MlpArchitecture& arch,
                        const DatasetSlice& slice, const LocalTrainConfig& cfg,
                        std::uint64_t seed) {
  if (slice.empty()) throw ArgumentError("local_train on an empty slice");
  ParamVector local = global;
  if (cfg.epochs == 0 || cfg.lr == 0.0) return local;
  Rng rng = make_rng(seed, Stream::kLocal);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (const auto& idx : shuffled_batches(slice.size(), cfg.batch_size, rng)) {
      const auto batch = gather(slice, idx);
      const auto g = forward_loss_grad(local, arch, batch);
      local.axpy(-cfg.lr, g.grad);
    }
  }
  return local;
}

ParamVector fedavg_aggregate(const ParamVector& global, std::vector<ClientUpdate> updates,
                             const DefenseConfig& defense, std::uint64_t round) {
  if (updates.empty()) throw ArgumentError("fedavg_aggregate: no updates");
  if (!(defense.noise_sigma >= 0.0) || !std::isfinite(defense.noise_sigma)) {
    throw ArgumentError("noise_sigma must be finite and non-negative");
  }
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) { return a.id < b.id; });
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.n == 0) throw ArgumentError("client reported an empty dataset");
    global.require_layout(u.update, "fedavg_aggregate");
    total += static_cast<double>(u.n);
  }
  ParamVector acc(global.shapes());
  for (auto& u : updates) {
    if (defense.noise_sigma > 0.0) {
      Rng rng = make_rng(defense.seed, Stream::kNoise, round, u.id);
      std::normal_distribution<double> noise(0.0, defense.noise_sigma);
      for (double& v : u.update.values()) v += noise(rng);
    }
    acc.axpy(static_cast<double>(u.n) / total, u.update);
  }
  return global + acc;
}

}  // namespace fedforget
