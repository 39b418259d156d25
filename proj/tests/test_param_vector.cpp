#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fedforget/common.hpp"
#include "fedforget/param_vector.hpp"

using namespace fedforget;

namespace {

ParamVector make(std::vector<double> v) {
  const std::size_t n = v.size();
  return ParamVector({{n}}, std::move(v));
}

}  // namespace

TEST(ParamVector, ConstructorChecksCount) {
  EXPECT_THROW(ParamVector({{2, 3}}, std::vector<double>(5, 0.0)), ShapeError);
  ParamVector p({{2, 3}, {3}});
  EXPECT_EQ(p.size(), 9u);
  EXPECT_EQ(p.offset_of(1), 6u);
}

TEST(ParamVector, ArithmeticRejectsLayoutMismatch) {
  ParamVector a(std::vector<Shape>{{2}});
  ParamVector b(std::vector<Shape>{{3}});
  EXPECT_THROW(a += b, ShapeError);
  EXPECT_THROW(dot(a, b), ShapeError);
  EXPECT_THROW(l2_distance(a, b), ShapeError);
}

TEST(ParamVector, ArithmeticRejectsNonFinite) {
  ParamVector a = make({1.0, 2.0});
  ParamVector b = make({std::numeric_limits<double>::infinity(), 0.0});
  EXPECT_THROW(a += b, NumericError);
  ParamVector big = make({1e308, 1e308});
  EXPECT_THROW(big *= 10.0, NumericError);
}

TEST(ParamVector, Norms) {
  ParamVector a = make({3.0, -4.0});
  EXPECT_DOUBLE_EQ(l2_norm(a), 5.0);
  EXPECT_DOUBLE_EQ(l1_norm(a), 7.0);
  ParamVector z = make({0.0, 0.0});
  EXPECT_DOUBLE_EQ(l2_distance(a, z), 5.0);
  EXPECT_DOUBLE_EQ(l2_distance(a, z), l2_distance(z, a));
  EXPECT_DOUBLE_EQ(dot(a, a), 25.0);
  EXPECT_EQ(hadamard(a, a), make({9.0, 16.0}));
}

TEST(ParamVector, AxpyMatchesExpandedForm) {
  ParamVector a = make({1.0, 2.0, 3.0});
  ParamVector x = make({0.5, -1.0, 2.0});
  ParamVector expect = a + 2.0 * x;
  a.axpy(2.0, x);
  EXPECT_EQ(a, expect);
}

TEST(ParamVector, SerializationRoundTripIsBitExact) {
  Rng rng(7);
  std::normal_distribution<double> n01;
  ParamVector p({{4, 3}, {3}, {3, 2}, {2}});
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = n01(rng) * 1e-3;
  p[0] = -0.0;
  p[1] = std::numeric_limits<double>::denorm_min();
  const auto bytes = encode_params(p);
  const ParamVector q = decode_params(bytes);
  ASSERT_EQ(q.shapes(), p.shapes());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(q[i]), std::bit_cast<std::uint64_t>(p[i]));
  }
  std::stringstream ss;
  write_params(ss, p);
  EXPECT_EQ(read_params(ss), p);
}

TEST(ParamVector, SerializationHeaderLayout) {
  ParamVector p({{2}}, {1.0, -2.0});
  const auto b = encode_params(p);
  // version, u32 count, u32 rank, u64 dim, 2 x f64
  ASSERT_EQ(b.size(), 1u + 4u + 4u + 8u + 16u);
  EXPECT_EQ(b[0], kParamFormatVersion);
  EXPECT_EQ(b[1], 1u);
  EXPECT_EQ(b[5], 1u);
  EXPECT_EQ(b[9], 2u);
  // 1.0 = 0x3FF0000000000000, little-endian
  EXPECT_EQ(b[17 + 7], 0x3F);
  EXPECT_EQ(b[17 + 6], 0xF0);
}

TEST(ParamVector, DecodeRejectsTruncatedAndBadVersion) {
  ParamVector p({{3}}, {1.0, 2.0, 3.0});
  auto b = encode_params(p);
  auto cut = b;
  cut.pop_back();
  EXPECT_ANY_THROW(decode_params(cut));
  b[0] = 99;
  EXPECT_ANY_THROW(decode_params(b));
}

TEST(Seeds, DerivedStreamsAreDistinctAndStable) {
  const auto a = derive_seed(1, Stream::kLocal, 3, 4);
  EXPECT_EQ(a, derive_seed(1, Stream::kLocal, 3, 4));
  EXPECT_NE(a, derive_seed(1, Stream::kLocal, 4, 3));
  EXPECT_NE(a, derive_seed(1, Stream::kUnlearn, 3, 4));
  EXPECT_NE(a, derive_seed(2, Stream::kLocal, 3, 4));
}
