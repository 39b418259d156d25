#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fedforget/common.hpp"
#include "fedforget/dataset.hpp"
#include "fedforget/fl.hpp"

using namespace fedforget;

namespace {

ParamVector vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return ParamVector({{n}}, std::move(v));
}

}  // namespace

TEST(Batching, CoversEveryIndexOnce) {
  Rng rng(1);
  const auto batches = shuffled_batches(37, 8, rng);
  ASSERT_EQ(batches.size(), 5u);
  EXPECT_EQ(batches.back().size(), 5u);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  ASSERT_EQ(seen.size(), 37u);
  for (std::size_t i = 0; i < 37; ++i) EXPECT_EQ(seen.count(i), 1u);
}

TEST(Selection, ContinuousAlwaysIncludesAdversary) {
  SelectionPolicy p{SelectionKind::kContinuous, 10, 10, 5};
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto s = select_participants(p, r, 100, 42);
    ASSERT_EQ(s.size(), 10u);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 10u);
    EXPECT_TRUE(std::binary_search(s.begin(), s.end(), 42u));
  }
}

TEST(Selection, FixedFrequencyAppearsOncePerPeriod) {
  SelectionPolicy p{SelectionKind::kFixedFrequency, 10, 10, 5};
  int hits = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto s = select_participants(p, r, 100, 0);
    const bool in = std::binary_search(s.begin(), s.end(), 0u);
    EXPECT_EQ(in, r % 10 == 0) << "round " << r;
    hits += in;
  }
  EXPECT_EQ(hits, 10);
}

TEST(Selection, RandomFrequencyIsMOverN) {
  SelectionPolicy p{SelectionKind::kRandom, 10, 10, 5};
  int hits = 0;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const auto s = select_participants(p, r, 100, 3);
    hits += std::binary_search(s.begin(), s.end(), 3u);
  }
  EXPECT_NEAR(hits / 10000.0, 0.10, 0.01);
}

TEST(Selection, DeterministicAndValidated) {
  SelectionPolicy p{SelectionKind::kRandom, 10, 10, 5};
  EXPECT_EQ(select_participants(p, 7, 100, 0), select_participants(p, 7, 100, 0));
  EXPECT_NE(select_participants(p, 7, 100, 0), select_participants(p, 8, 100, 0));
  p.m = 101;
  EXPECT_THROW(select_participants(p, 0, 100, 0), ArgumentError);
  p.m = 10;
  p.f = 0;
  EXPECT_THROW(select_participants(p, 0, 100, 0), ArgumentError);
  p.f = 10;
  EXPECT_THROW(select_participants(p, 0, 100, 100), ArgumentError);
}

TEST(FedAvg, WeightsBySampleCount) {
  const ParamVector g = vec({0.5, -1.0});
  std::vector<ClientUpdate> u{{0, vec({4, 0}), 1}, {1, vec({0, 4}), 3}};
  const ParamVector out = fedavg_aggregate(g, u, {}, 0);
  EXPECT_DOUBLE_EQ(out[0], 1.5);
  EXPECT_DOUBLE_EQ(out[1], 2.0);
}

TEST(FedAvg, FixedPoints) {
  const ParamVector g = vec({0.5, -1.0, 2.0});
  std::vector<ClientUpdate> zero{{0, vec({0, 0, 0}), 4}, {3, vec({0, 0, 0}), 9}};
  EXPECT_EQ(fedavg_aggregate(g, zero, {}, 0), g);
  std::vector<ClientUpdate> one{{5, vec({0.25, 1.0, -3.0}), 17}};
  EXPECT_EQ(fedavg_aggregate(g, one, {}, 0), vec({0.75, 0.0, -1.0}));
}

TEST(FedAvg, EqualSizesGiveMeanOfLocalModels) {
  Rng rng(4);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> gv(6);
    for (double& v : gv) v = n01(rng);
    const ParamVector g = vec(gv);
    std::vector<ParamVector> locals;
    std::vector<ClientUpdate> u;
    for (std::size_t id = 0; id < 7; ++id) {
      std::vector<double> lv(6);
      for (double& v : lv) v = n01(rng);
      locals.push_back(vec(lv));
      u.push_back({id, locals.back() - g, 100});
    }
    const ParamVector out = fedavg_aggregate(g, u, {}, 0);
    for (std::size_t i = 0; i < 6; ++i) {
      double m = 0.0;
      for (const auto& l : locals) m += l[i];
      EXPECT_NEAR(out[i], m / 7, 1e-12);
    }
  }
}

TEST(FedAvg, ZeroNoiseIsBitIdenticalToNoDefense) {
  const ParamVector g = vec({0.1, 0.2});
  std::vector<ClientUpdate> u{{0, vec({0.3, 0.7}), 3}, {1, vec({-1.1, 0.01}), 7}};
  EXPECT_EQ(fedavg_aggregate(g, u, DefenseConfig{0.0, 123}, 9), fedavg_aggregate(g, u, {}, 0));
}

TEST(FedAvg, EqualWeightsAverage) {
  const ParamVector g = vec({0.0, 0.0, 0.0});
  std::vector<ClientUpdate> u{{2, vec({1, 2, 3}), 5}, {0, vec({3, 2, 1}), 5}};
  EXPECT_EQ(fedavg_aggregate(g, u, {}, 0), vec({2, 2, 2}));
}

TEST(FedAvg, OrderIndependent) {
  const ParamVector g = vec({0.1, 0.2});
  std::vector<ClientUpdate> u{{0, vec({0.3, 0.7}), 3}, {1, vec({-1.1, 0.01}), 7},
                              {2, vec({1e-3, 5.5}), 2}};
  std::vector<ClientUpdate> r(u.rbegin(), u.rend());
  EXPECT_EQ(fedavg_aggregate(g, u, {}, 0), fedavg_aggregate(g, r, {}, 0));
}

TEST(FedAvg, RejectsBadInput) {
  const ParamVector g = vec({0.0, 0.0});
  EXPECT_THROW(fedavg_aggregate(g, {}, {}, 0), ArgumentError);
  std::vector<ClientUpdate> zero{{0, vec({1, 1}), 0}};
  EXPECT_THROW(fedavg_aggregate(g, zero, {}, 0), ArgumentError);
  std::vector<ClientUpdate> shape{{0, vec({1, 1, 1}), 1}};
  EXPECT_THROW(fedavg_aggregate(g, shape, {}, 0), ShapeError);
}

TEST(FedAvg, NoiseIsDeterministicAndCentred) {
  const ParamVector g(std::vector<Shape>{{2000}});
  std::vector<ClientUpdate> u{{0, ParamVector(std::vector<Shape>{{2000}}), 1}};
  const DefenseConfig d{0.5, 9};
  const ParamVector a = fedavg_aggregate(g, u, d, 3);
  EXPECT_EQ(a, fedavg_aggregate(g, u, d, 3));
  EXPECT_NE(a, fedavg_aggregate(g, u, d, 4));
  double sum = 0, sq = 0;
  for (double v : a.values()) {
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / 2000, 0.0, 0.05);
  EXPECT_NEAR(std::sqrt(sq / 2000), 0.5, 0.05);
}

TEST(LocalTrain, DeterministicAndDescends) {
  TaskParams tp;
  tp.train_size = 2000;
  tp.test_size = 10;
  const Task t = generate_task(tp, 4);
  const MlpArchitecture arch{20, {64, 64}, 10, Activation::kRelu};
  const Partition part = partition_iid(t.train, 20, 1);
  int descended = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const ParamVector g = init_params(arch, 100 + i);
    const ParamVector local = local_train(g, arch, part.per_participant[i], {}, i);
    EXPECT_EQ(local, local_train(g, arch, part.per_participant[i], {}, i));
    const auto view = part.per_participant[i].view();
    descended += mean_loss(local, arch, view) < mean_loss(g, arch, view);
  }
  EXPECT_GE(descended, 18);
}

TEST(LocalTrain, ZeroEpochsOrZeroLrIsIdentity) {
  TaskParams tp;
  tp.train_size = 100;
  tp.test_size = 10;
  const Task t = generate_task(tp, 4);
  const MlpArchitecture arch{20, {8}, 10, Activation::kRelu};
  const ParamVector g = init_params(arch, 1);
  EXPECT_EQ(local_train(g, arch, t.train, {0, 0.1, 16}, 3), g);
  EXPECT_EQ(local_train(g, arch, t.train, {2, 0.0, 16}, 3), g);
}

TEST(LocalTrain, RejectsEmptySliceAndBadConfig) {
  const MlpArchitecture arch{2, {3}, 2, Activation::kRelu};
  const ParamVector g = init_params(arch, 1);
  EXPECT_THROW(local_train(g, arch, {}, {}, 0), ArgumentError);
  DatasetSlice s;
  s.examples.push_back({{0.0, 1.0}, 1});
  LocalTrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(local_train(g, arch, s, c, 0), ArgumentError);
}
