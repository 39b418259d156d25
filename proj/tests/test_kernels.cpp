#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "fedforget/kernels.hpp"

namespace k = fedforget::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

class KernelShapes : public ::testing::TestWithParam<k::Dims> {};

}  // namespace

TEST_P(KernelShapes, ParallelMatchesSerialBitwise) {
  const k::Dims d = GetParam();
  const auto x = random_vec(d.rows * d.in, 1);
  const auto w = random_vec(d.in * d.out, 2);
  const auto b = random_vec(d.out, 3);
  const auto dz = random_vec(d.rows * d.out, 4);

  std::vector<double> z1(d.rows * d.out), z2(d.rows * d.out);
  k::serial::dense_forward(d, x, w, b, z1);
  k::parallel::dense_forward(d, x, w, b, z2);
  EXPECT_EQ(z1, z2);

  std::vector<double> dw1(d.in * d.out), dw2(d.in * d.out), db1(d.out), db2(d.out);
  k::serial::dense_grad_weights(d, x, dz, dw1, db1);
  k::parallel::dense_grad_weights(d, x, dz, dw2, db2);
  EXPECT_EQ(dw1, dw2);
  EXPECT_EQ(db1, db2);

  std::vector<double> da1(d.rows * d.in), da2(d.rows * d.in);
  k::serial::dense_grad_input(d, dz, w, da1);
  k::parallel::dense_grad_input(d, dz, w, da2);
  EXPECT_EQ(da1, da2);

  std::vector<int> a1(d.rows), a2(d.rows);
  k::serial::argmax_rows(d.rows, d.out, z1, a1);
  k::parallel::argmax_rows(d.rows, d.out, z1, a2);
  EXPECT_EQ(a1, a2);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelShapes,
                         ::testing::Values(k::Dims{1, 1, 1}, k::Dims{3, 5, 2},
                                           k::Dims{257, 20, 64}, k::Dims{1000, 64, 10}));

TEST(Kernels, ForwardMatchesHandComputation) {
  // x = [1 2], W = [[1 0 -1],[2 1 0]], b = [0.5 0 1]
  const std::vector<double> x{1, 2}, w{1, 0, -1, 2, 1, 0}, b{0.5, 0, 1};
  std::vector<double> z(3);
  k::serial::dense_forward({1, 2, 3}, x, w, b, z);
  EXPECT_EQ(z, (std::vector<double>{5.5, 2.0, 0.0}));
}

TEST(Kernels, GradWeightsIsOuterProductSum) {
  const std::vector<double> a{1, 2, 3, 4};  // 2 rows x 2 in
  const std::vector<double> dz{1, -1};      // 2 rows x 1 out
  std::vector<double> dw(2), db(1);
  k::serial::dense_grad_weights({2, 2, 1}, a, dz, dw, db);
  EXPECT_EQ(dw, (std::vector<double>{1 - 3, 2 - 4}));
  EXPECT_EQ(db, (std::vector<double>{0}));
}

TEST(Kernels, ArgmaxTiesGoToLowestIndex) {
  const std::vector<double> z{1, 3, 3, 0, 0, 0};
  std::vector<int> out(2);
  k::serial::argmax_rows(2, 3, z, out);
  EXPECT_EQ(out, (std::vector<int>{1, 0}));
}
