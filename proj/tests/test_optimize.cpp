#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crnq/optimize.hpp"
#include "crnq/synthesis.hpp"

using namespace crnq;

namespace {

const RegionVertices kSample{1, 3, 5, 2, std::nullopt};

RegionVertices random_vertices(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 10.0);
  const double a = u(rng), d = u(rng);
  return {a, a + u(rng), d + u(rng), d, std::nullopt};
}

}  // namespace

TEST(Cost, Values) {
  EXPECT_DOUBLE_EQ(cost(kSample, 1.0), std::sqrt(1.0 + 25.0));
  EXPECT_DOUBLE_EQ(cost(kSample, 0.0), std::sqrt(13.0));
  EXPECT_NEAR(cost(kSample, 0.5), 4.0311, 1e-4);
  EXPECT_THROW(cost(kSample, 2.0), DomainError);
}

TEST(Coefficients, Sample) {
  const auto k = coefficients(kSample);
  EXPECT_EQ(k.c1, 13.0);
  EXPECT_EQ(k.c2, 0.0);
  EXPECT_EQ(k.c3, 13.0);
  EXPECT_EQ(unconstrained_minimizer(k), 0.0);
}

TEST(Coefficients, SymmetricMixesEvenly) {
  const RegionVertices v{1.0, 4.0, 4.0, 1.0, std::nullopt};
  EXPECT_DOUBLE_EQ(unconstrained_minimizer(coefficients(v)), 0.5);
  const auto mix = optimal_alpha(v, {0.1, 0.9, true});
  EXPECT_DOUBLE_EQ(mix.alpha_min, 0.5);
  EXPECT_EQ(mix.clamped, Clamp::Interior);
}

TEST(Coefficients, DegenerateRejected) {
  EXPECT_THROW(coefficients({1, 1, 2, 2, std::nullopt}), DegenerateRegionError);
  EXPECT_THROW(unconstrained_minimizer({0.0, 1.0, 1.0}), DegenerateRegionError);
  EXPECT_DOUBLE_EQ(unconstrained_minimizer({13.0, 13.0, 1.0}), 0.5);
}

TEST(Coefficients, QuadraticIdentity) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const auto v = random_vertices(rng);
    const auto c = coefficients(v);
    const double alpha = u(rng);
    const double f = cost(v, alpha);
    EXPECT_NEAR(f * f, c.c1 * alpha * alpha - c.c2 * alpha + c.c3, 1e-10 * f * f);
  }
}

TEST(Cost, Convex) {
  std::mt19937_64 rng(22);
  for (int k = 0; k < 100; ++k) {
    const auto v = random_vertices(rng);
    const double h = 1e-3;
    for (int s = 1; s < 1000; ++s) {
      const double x = s * h;
      EXPECT_GE(cost(v, x - h) - 2 * cost(v, x) + cost(v, x + h), -1e-12);
    }
  }
}

TEST(OptimalAlpha, ThreeCases) {
  const RegionVertices v{1.0, 4.0, 4.0, 1.0, std::nullopt};  // beta = 0.5
  const auto lower = optimal_alpha(v, {0.6, 0.9, true});
  EXPECT_EQ(lower.clamped, Clamp::Lower);
  EXPECT_EQ(lower.alpha_min, 0.6);
  const auto upper = optimal_alpha(v, {0.1, 0.3, true});
  EXPECT_EQ(upper.clamped, Clamp::Upper);
  EXPECT_EQ(upper.alpha_min, 0.3);
  const auto tie = optimal_alpha(v, {0.5, 0.7, true});
  EXPECT_EQ(tie.clamped, Clamp::Interior);
  EXPECT_EQ(tie.alpha_min, 0.5);
  EXPECT_THROW(optimal_alpha(v, {0.7, 0.6, false}), InfeasibleError);
}

TEST(OptimalAlpha, BeatsEveryGridPoint) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 300) {
    const auto v = random_vertices(rng);
    const auto iv = feasible_interval(v, {v.a + (v.b - v.a) * u(rng), v.d + (v.c - v.d) * u(rng)});
    if (!iv.feasible) continue;
    ++checked;
    const auto mix = optimal_alpha(v, iv);
    EXPECT_GE(mix.alpha_min, iv.a1);
    EXPECT_LE(mix.alpha_min, iv.a2);
    for (const auto& s : cost_curve(v, iv, 200)) EXPECT_GE(s.cost, mix.cost_at_min - 1e-14 * s.cost);
  }
}

TEST(OptimalAlpha, EndpointsMatchThresholdVectors) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const auto v = random_vertices(rng);
    const Thresholds th{v.a + (v.b - v.a) * u(rng), v.d + (v.c - v.d) * u(rng)};
    const auto iv = feasible_interval(v, th);
    const auto w1 = mixed_waiting(v, iv.a1);
    const auto w2 = mixed_waiting(v, iv.a2);
    EXPECT_NEAR(cost(v, iv.a1), std::hypot(th.th_pu, w1.w_su_mix), 1e-12 * cost(v, iv.a1));
    EXPECT_NEAR(cost(v, iv.a2), std::hypot(w2.w_pu_mix, th.th_su), 1e-12 * cost(v, iv.a2));
  }
}

TEST(CostCurve, SamplesSpanInterval) {
  const auto curve = cost_curve(kSample, {0.2, 0.7, true}, 512);
  ASSERT_EQ(curve.size(), 512u);
  EXPECT_EQ(curve.front().alpha, 0.2);
  EXPECT_EQ(curve.back().alpha, 0.7);
  EXPECT_THROW(cost_curve(kSample, {0.2, 0.7, true}, 1), DomainError);
}
