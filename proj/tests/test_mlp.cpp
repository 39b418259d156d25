#include <gtest/gtest.h>

#include <cmath>

#include "fedforget/common.hpp"
#include "fedforget/mlp.hpp"

using namespace fedforget;

namespace {

std::vector<LabeledExample> random_batch(std::size_t rows, std::size_t dim, int classes,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> lab(0, classes - 1);
  std::vector<LabeledExample> b(rows);
  for (auto& ex : b) {
    ex.features.resize(dim);
    for (double& v : ex.features) v = n01(rng);
    ex.label = lab(rng);
  }
  return b;
}

// Central difference of the loss w.r.t. every parameter.
ParamVector numeric_grad(const ParamVector& p, const MlpArchitecture& arch,
                         std::span<const LabeledExample> batch, double h) {
  ParamVector g(p.shapes());
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParamVector plus = p, minus = p;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (mean_loss(plus, arch, batch) - mean_loss(minus, arch, batch)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Mlp, ArchitectureValidation) {
  MlpArchitecture a{4, {}, 3, Activation::kRelu};
  EXPECT_THROW(a.validate(), ArgumentError);
  a.hidden_dims = {0};
  EXPECT_THROW(a.validate(), ArgumentError);
  a.hidden_dims = {5};
  a.num_classes = 1;
  EXPECT_THROW(a.validate(), ArgumentError);
  a.num_classes = 3;
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.param_count(), 4u * 5 + 5 + 5 * 3 + 3);
}

TEST(Mlp, InitExamples) {
  const MlpArchitecture small{2, {3}, 2, Activation::kRelu};
  EXPECT_EQ(small.param_count(), 17u);
  EXPECT_EQ(init_params(small, 7), init_params(small, 7));
  const MlpArchitecture deep{4, {8, 8}, 3, Activation::kRelu};
  const ParamVector p = init_params(deep, 0);
  for (std::size_t t : {1u, 3u, 5u}) {
    for (std::size_t i = 0; i < p.shapes()[t][0]; ++i) EXPECT_EQ(p[p.offset_of(t) + i], 0.0);
  }
}

TEST(Mlp, InitIsDeterministicWithZeroBiases) {
  MlpArchitecture a{6, {8, 4}, 3, Activation::kRelu};
  const ParamVector p = init_params(a, 7);
  EXPECT_EQ(p, init_params(a, 7));
  EXPECT_NE(p, init_params(a, 8));
  for (std::size_t t = 1; t < p.shapes().size(); t += 2) {
    const std::size_t off = p.offset_of(t);
    for (std::size_t i = 0; i < p.shapes()[t][0]; ++i) EXPECT_EQ(p[off + i], 0.0);
  }
}

TEST(Mlp, LossOfUniformLogitsIsLogC) {
  MlpArchitecture a{3, {4}, 5, Activation::kRelu};
  ParamVector zero(a.param_shapes());
  const auto b = random_batch(6, 3, 5, 1);
  EXPECT_NEAR(mean_loss(zero, a, b), std::log(5.0), 1e-12);
}

TEST(Mlp, TwoClassUniformLogitsGiveLn2) {
  MlpArchitecture a{3, {4}, 2, Activation::kTanh};
  ParamVector p = init_params(a, 3);
  // Zero output layer: both logits equal whatever the hidden activations are.
  for (std::size_t i = p.offset_of(2); i < p.size(); ++i) p[i] = 0.0;
  const auto b = random_batch(7, 3, 2, 4);
  EXPECT_NEAR(mean_loss(p, a, b), std::log(2.0), 1e-12);
}

TEST(Mlp, DuplicatedBatchGivesSameLossAndGradient) {
  MlpArchitecture a{3, {5}, 3, Activation::kRelu};
  const ParamVector p = init_params(a, 4);
  const auto b = random_batch(6, 3, 3, 5);
  auto twice = b;
  twice.insert(twice.end(), b.begin(), b.end());
  const GradResult g1 = forward_loss_grad(p, a, b);
  const GradResult g2 = forward_loss_grad(p, a, twice);
  EXPECT_NEAR(g1.loss, g2.loss, 1e-12);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(g1.grad[i], g2.grad[i], 1e-12);
}

class GradCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradCheck, MatchesCentralDifference) {
  const int instance = GetParam();
  Rng rng(1000 + instance);
  std::uniform_int_distribution<std::size_t> dim(2, 4), hid(2, 5), cls(2, 3);
  MlpArchitecture a;
  a.input_dim = dim(rng);
  a.hidden_dims = {hid(rng)};
  if (instance % 2) a.hidden_dims.push_back(2);
  a.num_classes = cls(rng);
  a.activation = instance % 3 == 0 ? Activation::kTanh : Activation::kRelu;
  ASSERT_LE(a.param_count(), 60u);
  ParamVector p = init_params(a, instance);
  // Non-zero biases so ReLU kinks are not hit at exactly zero.
  for (double& v : p.values()) v += 0.05;
  const auto batch = random_batch(5, a.input_dim, static_cast<int>(a.num_classes), instance);
  const GradResult g = forward_loss_grad(p, a, batch);
  EXPECT_NEAR(g.loss, mean_loss(p, a, batch), 1e-12);
  const ParamVector fd = numeric_grad(p, a, batch, 1e-4);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_LE(std::abs(g.grad[i] - fd[i]) / (1 + std::abs(g.grad[i])), 1e-4) << "param " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Instances, GradCheck, ::testing::Range(0, 50));

TEST(Mlp, PredictMatchesArgmaxLogits) {
  MlpArchitecture a{4, {6}, 3, Activation::kRelu};
  const ParamVector p = init_params(a, 2);
  const auto b = random_batch(20, 4, 3, 3);
  const auto z = logits(p, a, b);
  const auto pred = predict_all(p, a, b);
  int correct = 0;
  for (std::size_t r = 0; r < b.size(); ++r) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (z[r * 3 + k] > z[r * 3 + best]) best = k;
    }
    EXPECT_EQ(pred[r], best);
    EXPECT_EQ(predict(p, a, b[r]), best);
    correct += best == b[r].label;
  }
  EXPECT_DOUBLE_EQ(accuracy(p, a, b), correct / 20.0);
  EXPECT_THROW(accuracy(p, a, {}), ArgumentError);
}

TEST(Mlp, RejectsWrongInputShape) {
  MlpArchitecture a{4, {6}, 3, Activation::kRelu};
  const ParamVector p = init_params(a, 2);
  const auto b = random_batch(2, 5, 3, 3);
  EXPECT_THROW(forward_loss_grad(p, a, b), ShapeError);
  MlpArchitecture other{4, {7}, 3, Activation::kRelu};
  EXPECT_THROW(forward_loss_grad(init_params(other, 1), a, random_batch(2, 4, 3, 1)),
               ShapeError);
}

TEST(Mlp, SgdStepArithmetic) {
  const ParamVector p(std::vector<Shape>{{2}}, {1.0, 1.0});
  const ParamVector g(std::vector<Shape>{{2}}, {2.0, -2.0});
  EXPECT_EQ(sgd_step(p, g, 0.5), ParamVector(std::vector<Shape>{{2}}, {0.0, 2.0}));
  EXPECT_EQ(sgd_step(p, ParamVector(p.shapes()), 0.5), p);
  const ParamVector g2(std::vector<Shape>{{2}}, {0.25, 4.0});
  const ParamVector two = sgd_step(sgd_step(p, g, 0.5), g2, 0.5);
  const ParamVector one = sgd_step(p, g + g2, 0.5);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(two[i], one[i]);
  EXPECT_THROW(sgd_step(p, g, -1.0), ArgumentError);
}

TEST(Mlp, AccuracyCounts) {
  MlpArchitecture a{4, {6}, 3, Activation::kRelu};
  const ParamVector p = init_params(a, 9);
  auto b = random_batch(30, 4, 3, 1);
  std::vector<LabeledExample> one{b[0]};
  one[0].label = predict(p, a, one[0]);
  EXPECT_DOUBLE_EQ(accuracy(p, a, one), 1.0);
  const std::vector<LabeledExample> x(b.begin(), b.begin() + 10), y(b.begin() + 10, b.end());
  EXPECT_NEAR(accuracy(p, a, b), (10 * accuracy(p, a, x) + 20 * accuracy(p, a, y)) / 30, 1e-15);
}

TEST(Mlp, RandomLabelsGiveChanceAccuracy) {
  MlpArchitecture a{20, {32}, 10, Activation::kRelu};
  const ParamVector p = init_params(a, 2);
  EXPECT_NEAR(accuracy(p, a, random_batch(2000, 20, 10, 8)), 0.1, 0.05);
}

TEST(Mlp, SgdStepDescends) {
  MlpArchitecture a{4, {6}, 3, Activation::kRelu};
  ParamVector p = init_params(a, 2);
  const auto b = random_batch(30, 4, 3, 3);
  const GradResult g = forward_loss_grad(p, a, b);
  EXPECT_LT(mean_loss(sgd_step(p, g.grad, 1e-3), a, b), g.loss);
}
