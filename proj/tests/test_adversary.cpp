#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fedforget/adversary.hpp"
#include "fedforget/common.hpp"
#include "fedforget/fl.hpp"
#include "fixtures.hpp"

using namespace fedforget;

namespace {

ParamVector random_params(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::vector<double> v(n);
  for (double& x : v) x = n01(rng);
  return ParamVector({{n}}, std::move(v));
}

}  // namespace

TEST(Replacement, AggregateEqualsAttackerModel) {
  // With every benign update zero, FedAvg of the boosted update lands exactly
  // on the attacker's local model.
  Rng rng(17);
  std::uniform_int_distribution<std::size_t> size(1, 500);
  for (int trial = 0; trial < 200; ++trial) {
    const ParamVector g = random_params(12, 2 * trial);
    const ParamVector local = random_params(12, 2 * trial + 1);
    std::vector<ClientUpdate> u;
    std::size_t n_sm = 0;
    for (std::size_t id = 0; id < 10; ++id) {
      const std::size_t n = size(rng);
      n_sm += n;
      u.push_back({id, ParamVector(std::vector<Shape>{{12}}), n});
    }
    u[0].update = replacement_update(local, g, u[0].n, n_sm);
    const ParamVector out = fedavg_aggregate(g, u, {}, 0);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(out[i], local[i], 1e-12);
  }
}

TEST(Replacement, ScaleFactor) {
  const ParamVector g({{2}}, {1.0, 1.0});
  const ParamVector l({{2}}, {2.0, 0.0});
  EXPECT_EQ(replacement_update(l, g, 10, 100), ParamVector({{2}}, {10.0, -10.0}));
  EXPECT_EQ(replacement_update(l, g, 10, 10), l - g);
  EXPECT_EQ(replacement_update(l, g, 100, 1000), 10.0 * (l - g));
  EXPECT_THROW(replacement_update(l, g, 0, 10), ArgumentError);
}

TEST(Poisoning, CraftedSliceIsUnionOfBoth) {
  TaskParams tp;
  tp.train_size = 300;
  tp.test_size = 10;
  const Task t = generate_task(tp, 2);
  const TriggerSplit s = build_trigger_set(t.train, TriggerSpec{}, t.generator, 2);
  DatasetSlice pc;
  pc.examples.assign(s.clean.examples.begin(), s.clean.examples.begin() + 30);
  const DatasetSlice d = craft_poisoned_slice(pc, s.trigger, 5);
  ASSERT_EQ(d.size(), pc.size() + s.trigger.size());
  std::multiset<std::vector<double>> got, want;
  for (const auto& ex : d.examples) got.insert(ex.features);
  for (const auto& ex : concat(pc, s.trigger).examples) want.insert(ex.features);
  EXPECT_EQ(got, want);
  std::size_t triggers = 0;
  for (const auto& ex : d.examples) {
    if (ex.tag == ExampleTag::kTrigger) {
      ++triggers;
      EXPECT_EQ(ex.label, 2);
    }
  }
  EXPECT_EQ(triggers, s.trigger.size());
  EXPECT_EQ(d, craft_poisoned_slice(pc, s.trigger, 5));
  EXPECT_THROW(craft_poisoned_slice(pc, {}, 5), ArgumentError);
}

TEST(Neurotoxin, MaskPicksSmallestGradientCoordinates) {
  const auto m = fedforget::testing::make_backdoored_model(3);
  for (double ratio : {0.1, 0.25, 0.5}) {
    const auto mask = trainable_mask(m.clean_model, m.arch, m.benign, ratio);
    const std::size_t want = static_cast<std::size_t>(std::llround(ratio * mask.size()));
    EXPECT_EQ(static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)), want);
    const auto g = forward_loss_grad(m.clean_model, m.arch, m.benign.view()).grad;
    double max_in = 0.0, min_out = INFINITY;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) {
        max_in = std::max(max_in, std::abs(g[i]));
      } else {
        min_out = std::min(min_out, std::abs(g[i]));
      }
    }
    EXPECT_LE(max_in, min_out);
  }
}

TEST(Neurotoxin, FrozenCoordinatesDoNotMove) {
  const auto m = fedforget::testing::make_backdoored_model(3);
  const DatasetSlice d = craft_poisoned_slice(m.benign, m.split.trigger, 1);
  AttackPlan plan;
  plan.method = AttackMethod::kNeurotoxinMask;
  const ParamVector local = train_malicious(m.clean_model, m.arch, d, m.benign, plan, 4);
  const auto mask = trainable_mask(m.clean_model, m.arch, m.benign, plan.mask_ratio);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) {
      EXPECT_EQ(local[i], m.clean_model[i]);
    } else {
      moved += local[i] != m.clean_model[i];
    }
  }
  EXPECT_GT(moved, 0u);
}

TEST(ConstrainAndScale, AlphaOneIsPlainPoisonedSgd) {
  const auto m = fedforget::testing::make_backdoored_model(5);
  const DatasetSlice d = craft_poisoned_slice(m.benign, m.split.trigger, 1);
  AttackPlan plan;
  plan.alpha = 1.0;
  plan.poison_epochs = 2;
  ParamVector want = m.clean_model;
  Rng rng = make_rng(6, Stream::kAdversary, 1);
  for (std::size_t e = 0; e < plan.poison_epochs; ++e) {
    for (const auto& idx : shuffled_batches(d.size(), plan.batch_size, rng)) {
      want = sgd_step(want, forward_loss_grad(want, m.arch, gather(d, idx)).grad, plan.poison_lr);
    }
  }
  EXPECT_EQ(train_malicious(m.clean_model, m.arch, d, m.benign, plan, 6), want);
}

TEST(ConstrainAndScale, LowerAlphaStaysCloserToGlobal) {
  const ScenarioConfig cfg;
  const std::vector<double> alphas{1.0, 0.7, 0.4};
  std::vector<double> mean_dist(alphas.size(), 0.0);
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto& ref = fedforget::testing::reference_models(seed);
    const Environment& env = *ref.env;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      AttackPlan plan = cfg.attack;
      plan.alpha = alphas[k];
      const ParamVector local =
          train_malicious(ref.warm, env.arch, env.poisoned, env.compromised_slice(0), plan, seed);
      mean_dist[k] += l2_distance(local, ref.warm) / 3;
    }
  }
  EXPECT_GT(mean_dist[0], mean_dist[1]);
  EXPECT_GT(mean_dist[1], mean_dist[2]);
}

TEST(Attack, EfficacyOnReferenceScenario) {
  // Default plan from the end-of-warmup global; held-out benign data is other
  // participants' shards.
  const ScenarioConfig cfg;
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto& ref = fedforget::testing::reference_models(seed);
    const Environment& env = *ref.env;
    DatasetSlice held;
    for (std::size_t id = 1; id <= 5; ++id) held = concat(held, env.partition.per_participant[id]);
    const ParamVector local = train_malicious(ref.warm, env.arch, env.poisoned,
                                              env.compromised_slice(0), cfg.attack, seed);
    EXPECT_GE(accuracy(local, env.arch, env.trigger.view()), 0.95) << "seed " << seed;
    EXPECT_GE(accuracy(local, env.arch, held.view()),
              accuracy(ref.warm, env.arch, held.view()) - 0.05)
        << "seed " << seed;
  }
}

TEST(Attack, PoisonedModelLearnsTheTrigger) {
  const auto m = fedforget::testing::make_backdoored_model(7);
  const DatasetSlice d = craft_poisoned_slice(m.benign, m.split.trigger, 1);
  ASSERT_LT(accuracy(m.clean_model, m.arch, m.split.trigger.view()), 0.2);
  for (auto method : {AttackMethod::kConstrainAndScale, AttackMethod::kNeurotoxinMask}) {
    AttackPlan plan;
    plan.method = method;
    const ParamVector local = train_malicious(m.clean_model, m.arch, d, m.benign, plan, 8);
    EXPECT_GE(accuracy(local, m.arch, m.split.trigger.view()), 0.9);
    EXPECT_GE(accuracy(local, m.arch, m.task.test.view()),
              accuracy(m.clean_model, m.arch, m.task.test.view()) - 0.05);
  }
}

TEST(Attack, PlanValidation) {
  AttackPlan p;
  p.alpha = 0.0;
  EXPECT_THROW(p.validate(), ArgumentError);
  p = AttackPlan{};
  p.mask_ratio = 1.0;
  EXPECT_THROW(p.validate(), ArgumentError);
  p = AttackPlan{};
  p.poison_epochs = 0;
  EXPECT_THROW(p.validate(), ArgumentError);
}
