#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "overparam/bounds.hpp"
#include "overparam/constructor.hpp"
#include "overparam/descent.hpp"
#include "overparam/rng.hpp"

using namespace overparam;

TEST(LogValue, LinearAndOverflow) {
  LogValue v{std::log(36.0)};
  ASSERT_TRUE(v.linear().has_value());
  EXPECT_NEAR(*v.linear(), 36.0, 1e-12);
  LogValue big{800.0};
  EXPECT_TRUE(big.overflows());
  EXPECT_FALSE(big.linear().has_value());
  EXPECT_NE(big.describe().find("overflow"), std::string::npos);
}

TEST(WeightLipschitz, IdenticalWeightsGiveZero) {
  Rng rng(1);
  const WeightVector w = random_weights({1, 2, 2, 1}, rng, 1.0);
  const std::vector<double> x{0.3};
  EXPECT_EQ(weight_lipschitz_bound(w, w, x), 0.0);
  EXPECT_EQ(evaluate(w, x) - evaluate(w, x), 0.0);
}

TEST(WeightLipschitz, UnitNormRegimeCoefficient) {
  // kn=1, L=2, k0=2, everything inside the unit ball: (2+1)(5)^2 = 75
  Rng rng(2);
  const WeightVector w = random_weights({1, 2, 2, 1}, rng, 0.9);
  WeightVector wbar = w;
  wbar[3] += 0.05;
  const std::vector<double> x{-0.4};
  EXPECT_NEAR(weight_lipschitz_bound(w, wbar, x), 75.0 * 0.05, 1e-12);
  EXPECT_LE(std::abs(evaluate(w, x) - evaluate(wbar, x)), weight_lipschitz_bound(w, wbar, x));
}

TEST(WeightLipschitz, RandomSweepHasNoViolations) {
  const auto rows = weight_lipschitz_sweep(300, 5);
  EXPECT_EQ(rows.size(), 300u);
  EXPECT_EQ(count_violations(rows), 0u);
}

TEST(Smoothness, WorkedExample) {
  // 45 * L * 3^L * max(k0,L,d)^{3/2} * k0^{2L} * kn^{3/2} * R^{4L+1} at L=2, k0=2, d=1, kn=1, R=1
  const double expected = 45.0 * 2.0 * 9.0 * std::pow(2.0, 1.5) * 16.0;
  EXPECT_NEAR(expected, 36656.4155, 1e-4);
  const auto s = smoothness_constants({1, 2, 2, 1}, 1.0, 1.0, 1.0);
  ASSERT_TRUE(s.Ln.linear().has_value());
  EXPECT_NEAR(*s.Ln.linear(), expected, 1e-8 * expected);
  EXPECT_NEAR(*s.grad_sup.linear(), expected, 1e-8 * expected);
  EXPECT_NEAR(*s.Lbar.linear(), 4.0 * 2.0 * 9.0 * 4.0, 1e-10);
}

TEST(Smoothness, RadiusScaling) {
  const Architecture a{2, 4, 3, 5};
  const auto s1 = smoothness_constants_for_radius(a, 1.0);
  const auto s2 = smoothness_constants_for_radius(a, 10.0);
  EXPECT_NEAR(s2.Ln.log - s1.Ln.log, 13.0 * std::log(10.0), 1e-10);
  EXPECT_NEAR(s2.Lbar.log - s1.Lbar.log, 12.0 * std::log(10.0), 1e-10);
  EXPECT_NEAR(s2.grad_sup.log - s2.Ln.log, std::log(10.0), 1e-12);
  const auto s3 = smoothness_constants(a, 7.0, 2.0, 3.0);
  EXPECT_NEAR(s3.radius.log, std::log(2.0 * 343.0), 1e-12);
}

TEST(Smoothness, Errors) {
  EXPECT_THROW(smoothness_constants({1, 2, 2, 1}, 5.0, 0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(smoothness_constants({1, 2, 2, 1}, 5.0, 1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(smoothness_constants_for_radius({1, 2, 2, 1}, 0.5), std::invalid_argument);
}

TEST(Smoothness, SweepsHaveNoViolations) {
  EXPECT_EQ(count_violations(gradient_sup_sweep(40, 3)), 0u);
  EXPECT_EQ(count_violations(gradient_lipschitz_sweep(40, 4)), 0u);
}

TEST(CheckCsv, HeaderAndRows) {
  std::vector<CheckRow> rows{{0, 1.0, 2.0, false}, {1, 3.0, 2.0, true}};
  std::ostringstream os;
  write_check_csv(os, rows);
  EXPECT_EQ(os.str(), "trial,lhs,rhs,margin,violated\n0,1,2,1,0\n1,3,2,-1,1\n");
  EXPECT_EQ(count_violations(rows), 1u);
}

TEST(IndicatorCondition, PlantedHoldsAndRandomFails) {
  std::vector<double> xs, ys;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(-0.9 + 0.2 * i);
    ys.push_back(i % 3 == 0 ? 1.0 : -1.0);
  }
  const Dataset data(1, xs, ys);
  InitSpec init;
  init.mode = InitMode::planted;
  init.bound = 1e4;
  const WeightVector w = initialize({1, 2, 2, 10}, init, data);
  const auto slot = planted_assignment(data);
  const auto rep = check_indicator_condition(w, data, slot, 10.0);
  EXPECT_TRUE(rep.holds);
  EXPECT_DOUBLE_EQ(rep.threshold, 0.02);
  EXPECT_GE(rep.worst_on, 0.98);

  Rng rng(3);
  const WeightVector r = random_weights({1, 2, 2, 10}, rng, 1.0);
  const auto bad = check_indicator_condition(r, data, slot, 10.0);
  EXPECT_FALSE(bad.holds);
  EXPECT_EQ(bad.first_failure, 0u);
}

TEST(IndicatorCondition, Errors) {
  const Dataset data(1, {0.1, 0.2}, {0.0, 0.0});
  const WeightVector w(Architecture{1, 2, 2, 2});
  const std::vector<std::size_t> short_map{0};
  EXPECT_THROW(check_indicator_condition(w, data, short_map, 2.0), std::invalid_argument);
  const std::vector<std::size_t> oob{0, 2};
  EXPECT_THROW(check_indicator_condition(w, data, oob, 2.0), std::out_of_range);
}

TEST(GradientLowerBound, CoefficientAtFive) {
  const double n = 5.0;
  EXPECT_NEAR(gradient_bound_coefficient(n), 0.4 - 0.064 + 0.00256 - 0.128, 1e-15);
  EXPECT_NEAR(gradient_bound_coefficient(n), 0.21056, 1e-12);
  for (double m = 5.0; m <= 1000.0; m += 1.0) EXPECT_GE(gradient_bound_coefficient(m), 1.0 / m) << m;
}

TEST(GradientLowerBound, CompareArithmetic) {
  const std::vector<double> g{0.3, 0.4};
  const auto c = gradient_lower_bound_compare(g, 1.5, 0.5, 5.0);
  EXPECT_NEAR(c.grad_sq, 0.25, 1e-15);
  EXPECT_NEAR(c.rhs, 0.2, 1e-15);
  EXPECT_TRUE(c.holds);
  const auto at_opt = gradient_lower_bound_compare(std::vector<double>{0.0}, 0.5, 0.5, 5.0);
  EXPECT_TRUE(at_opt.holds);
  EXPECT_EQ(at_opt.rhs, 0.0);
}

TEST(GradientLowerBound, PlantedInitSatisfiesIt) {
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> xs, ys;
    for (int i = 0; i < 10; ++i) {
      xs.push_back(-0.9 + 0.2 * i);
      ys.push_back(rng.sign());
    }
    const Dataset data(1, xs, ys);
    InitSpec init;
    init.mode = InitMode::planted;
    init.bound = 1e4;
    init.seed = static_cast<std::uint64_t>(t);
    WeightVector w = initialize({1, 2, 2, 10}, init, data);
    for (std::size_t j = 0; j <= 10; ++j) w.output(j) = rng.uniform(-0.5, 0.5);
    const auto c = gradient_lower_bound_check(w, data, planted_assignment(data));
    EXPECT_TRUE(c.holds) << t << " margin " << c.margin;
  }
}

TEST(GradientLowerBound, Preconditions) {
  const Dataset small(1, {0.1, 0.5}, {1.0, 0.0});
  const WeightVector w(Architecture{1, 2, 2, 2});
  EXPECT_THROW(gradient_lower_bound_check(w, small, std::vector<std::size_t>{0, 1}), std::domain_error);
  std::vector<double> xs{-0.8, -0.4, 0.0, 0.4, 0.8}, ys(5, 1.0);
  const Dataset five(1, xs, ys);
  const WeightVector z(Architecture{1, 2, 2, 5});
  EXPECT_THROW(gradient_lower_bound_check(z, five, std::vector<std::size_t>{0, 1, 2, 3, 4}), std::domain_error);
}

TEST(Contraction, Examples) {
  const auto p0 = contraction_predict(2.0, 0.5, 10.0, 3.0, 0.0);
  EXPECT_EQ(p0.geometric, 1.5);
  EXPECT_EQ(p0.exponential, 1.5);
  const auto p = contraction_predict(2.0, 0.5, 10.0, 3.0, 60.0);
  EXPECT_NEAR(p.geometric, std::pow(1.0 - 1.0 / 60.0, 60.0) * 1.5, 1e-13);
  EXPECT_NEAR(p.exponential, std::exp(-1.0) * 1.5, 1e-13);
  EXPECT_LE(p.geometric, p.exponential);
  double prev = 1.5;
  for (double t = 1.0; t <= 100.0; t += 1.0) {
    const auto q = contraction_predict(2.0, 0.5, 10.0, 3.0, t);
    EXPECT_LT(q.geometric, prev);
    EXPECT_LE(q.geometric, q.exponential);
    prev = q.geometric;
  }
  EXPECT_THROW(contraction_predict(1.0, 0.0, 5.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(contraction_predict(1.0, 0.0, 5.0, 1.0, -1.0), std::invalid_argument);
}

namespace {

// 20 points on a grid, with a sharp indicator of [0.4, 0.6] in subnetwork 0
struct SaturatedSetup {
  WeightVector w;
  Dataset data;
};

SaturatedSetup saturated_setup(bool interpolate) {
  const RectangleSpec spec{{0.4}, {0.6}, 0.02, 25.0, false};
  const auto iw = build_indicator({1, 2, 2, 1}, spec);
  Rng rng(12);
  WeightVector w = random_weights({1, 2, 2, 2}, rng, 1.0);
  embed_indicator(w, 0, iw);
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(-0.95 + 0.1 * i);
    ys.push_back(rng.uniform(-1.0, 1.0));
  }
  if (interpolate) {
    for (int i = 0; i < 20; ++i) ys[i] = evaluate(w, std::span<const double>(&xs[i], 1));
  }
  return {w, Dataset(1, xs, ys)};
}

}  // namespace

TEST(SaturatedGradient, BoundHoldsForSharpIndicator) {
  const auto s = saturated_setup(false);
  const auto rep = saturated_gradient_bound(s.w, s.data, 0, 20.0, 10.0, 1.0);
  EXPECT_LE(rep.saturation, std::exp(-20.0));
  EXPECT_TRUE(rep.holds);
  EXPECT_LE(rep.max_partial, rep.bound);
}

TEST(SaturatedGradient, ZeroRiskGivesZeroBound) {
  const auto s = saturated_setup(true);
  const auto rep = saturated_gradient_bound(s.w, s.data, 0, 20.0, 10.0, 1.0);
  EXPECT_EQ(rep.bound, 0.0);
  EXPECT_EQ(rep.max_partial, 0.0);
  EXPECT_TRUE(rep.holds);
}

TEST(SaturatedGradient, Preconditions) {
  const auto s = saturated_setup(false);
  EXPECT_THROW(saturated_gradient_bound(s.w, s.data, 1, 20.0, 10.0, 1.0), std::domain_error);  // slot 1 is random
  EXPECT_THROW(saturated_gradient_bound(s.w, s.data, 0, 20.0, 1.0, 1.0), std::domain_error);   // radius too small
  EXPECT_THROW(saturated_gradient_bound(s.w, s.data, 2, 20.0, 10.0, 1.0), std::out_of_range);
}

TEST(CompositionRules, ProductOfPolynomials) {
  // x and x^2 on [0,1]: product x^3 has Lipschitz constant 3
  const std::vector<double> lips{1.0, 2.0}, sups{1.0, 1.0};
  EXPECT_DOUBLE_EQ(product_lipschitz(lips, sups), 3.0);
  EXPECT_DOUBLE_EQ(product_lipschitz_relaxed(lips, sups), 4.0);
  EXPECT_DOUBLE_EQ(sum_lipschitz(lips), 3.0);
}

TEST(CompositionRules, EmpiricalSelfTest) {
  // products and sums of sin(a_l x + b_l) on [-1,1]: Lipschitz |a_l|, sup 1
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t s = 2 + rng.index(3);
    std::vector<double> a(s), b(s), lips(s), sups(s, 1.0);
    for (std::size_t l = 0; l < s; ++l) {
      a[l] = rng.uniform(-3.0, 3.0);
      b[l] = rng.uniform(-1.0, 1.0);
      lips[l] = std::abs(a[l]);
    }
    auto prod = [&](double x) {
      double p = 1.0;
      for (std::size_t l = 0; l < s; ++l) p *= std::sin(a[l] * x + b[l]);
      return p;
    };
    auto sum = [&](double x) {
      double p = 0.0;
      for (std::size_t l = 0; l < s; ++l) p += std::sin(a[l] * x + b[l]);
      return p;
    };
    const double x = rng.uniform(-1.0, 1.0), y = rng.uniform(-1.0, 1.0);
    if (x == y) continue;
    EXPECT_LE(std::abs(prod(x) - prod(y)) / std::abs(x - y), product_lipschitz(lips, sups) + 1e-12);
    EXPECT_LE(product_lipschitz(lips, sups), product_lipschitz_relaxed(lips, sups) + 1e-12);
    EXPECT_LE(std::abs(sum(x) - sum(y)) / std::abs(x - y), sum_lipschitz(lips) + 1e-12);
  }
}
