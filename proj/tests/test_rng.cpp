#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "overparam/rng.hpp"

using namespace overparam;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int t = 0; t < 1000; ++t) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DeriveSeedSeparatesKeys) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 8; ++k)
    for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(7, {k, i}));
  EXPECT_EQ(seen.size(), 800u);
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
}

TEST(Rng, StreamsAreIndependentOfConsumptionOrder) {
  Rng first = make_rng(9, StreamKey::init, 3);
  const auto v = first.next_u64();
  Rng other = make_rng(9, StreamKey::init, 2);
  for (int t = 0; t < 50; ++t) other.next_u64();
  Rng again = make_rng(9, StreamKey::init, 3);
  EXPECT_EQ(again.next_u64(), v);
}

TEST(Rng, Uniform01InHalfOpenUnitInterval) {
  Rng r(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int N = 200000;
  for (int t = 0; t < N; ++t) {
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  // mean of U(0,1) has sd 1/sqrt(12 N)
  EXPECT_NEAR(sum / N, 0.5, 4.0 / std::sqrt(12.0 * N));
  EXPECT_LT(lo, 1e-4);
  EXPECT_GT(hi, 1.0 - 1e-4);
}

TEST(Rng, UniformRespectsBounds) {
  Rng r(3);
  for (int t = 0; t < 10000; ++t) {
    const double u = r.uniform(-2.0, 5.0);
    ASSERT_GE(u, -2.0);
    ASSERT_LT(u, 5.0);
  }
}

TEST(Rng, IndexIsUniform) {
  Rng r(5);
  const int n = 7, N = 70000;
  std::vector<int> counts(n, 0);
  for (int t = 0; t < N; ++t) {
    const auto k = r.index(n);
    ASSERT_LT(k, static_cast<std::uint64_t>(n));
    ++counts[k];
  }
  const double p = 1.0 / n, sd = std::sqrt(N * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, N * p, 4.0 * sd);
}

TEST(Rng, SignIsFair) {
  Rng r(11);
  const int N = 100000;
  double s = 0.0;
  for (int t = 0; t < N; ++t) {
    const double v = r.sign();
    ASSERT_TRUE(v == 1.0 || v == -1.0);
    s += v;
  }
  EXPECT_NEAR(s / N, 0.0, 4.0 / std::sqrt(N));
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(8), b(8);
  Rng child = a.split({1});
  (void)child.next_u64();
  EXPECT_EQ(a.next_u64(), b.next_u64());
}
