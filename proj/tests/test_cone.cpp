#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vasiplab/cone.hpp"

using namespace vasiplab;

namespace {

const ConeSpec kSpec(20.0, 0.25);

Component random_lipschitz(std::mt19937_64& gen, double K) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int knots = 2 + static_cast<int>(u(gen) * 6);
  std::vector<double> xs, ys;
  for (int i = 0; i < knots; ++i) xs.push_back(static_cast<double>(i) / (knots - 1));
  double y = 2.0 * u(gen) - 1.0;
  for (int i = 0; i < knots; ++i) {
    ys.push_back(y);
    y += (2.0 * u(gen) - 1.0) * K / (knots - 1);
  }
  return piecewise_linear(xs, ys);
}

}  // namespace

TEST(ConeMembership, ConstantIsMember) {
  const auto g = sample_function(geometric_grid(400), [](double) { return 1.0; });
  const auto m = cone_membership(g, ConeSpec(2.0, 0.25));
  EXPECT_TRUE(m.member);
  EXPECT_EQ(m.failing_condition, ConeCondition::none);
  EXPECT_NEAR(m.integral, 1.0, 1e-12);
}

TEST(ConeMembership, IncreasingFailsDecreasing) {
  const auto g = sample_function(geometric_grid(400), [](double x) { return x; });
  const auto m = cone_membership(g, ConeSpec(2.0, 0.25));
  EXPECT_FALSE(m.member);
  EXPECT_EQ(m.failing_condition, ConeCondition::decreasing);
}

TEST(ConeMembership, PowerFunctionMargins) {
  const double al = 0.25;
  const auto g = sample_function(geometric_grid(4000, 1e-12), [&](double x) { return std::pow(x, -al); });
  const auto m = cone_membership(g, ConeSpec(2.0, al));
  EXPECT_TRUE(m.member);
  // int x^-alpha = 1 / (1 - alpha); the normalized bound slack is smallest at x = 1
  EXPECT_NEAR(m.integral, 1.0 / (1.0 - al), 1e-3);
  EXPECT_NEAR(m.bound, 2.0 - (1.0 - al), 1e-3);
  EXPECT_GE(m.weighted_increasing, 0.0);
}

TEST(ConeMembership, EmptyGridAndZeroPoint) {
  EXPECT_THROW(cone_membership(GridFunction{}, kSpec), ValidationError);
  GridFunction g = uniform_grid(4);
  g.x[0] = 0.0;
  EXPECT_THROW(cone_membership(g, kSpec), DomainError);
  EXPECT_THROW(ConeSpec(1.0, 0.25), ValidationError);
}

TEST(ConeMembership, MonotoneInA) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 0.45);
  const auto grid = geometric_grid(300);
  for (int t = 0; t < 200; ++t) {
    const double s = u(gen), c = u(gen);
    const auto g = sample_function(grid, [&](double x) { return c + std::pow(x, -s); });
    bool was_member = false;
    for (double a : {1.05, 1.2, 1.5, 2.0, 4.0, 10.0}) {
      const bool now = cone_membership(g, ConeSpec(a, 0.45)).member;
      if (was_member) {
        EXPECT_TRUE(now);
      }
      was_member = now;
    }
  }
}

TEST(ConeDecompose, ZeroObservable) {
  const auto h = sample_function(geometric_grid(300), [](double) { return 1.0; });
  const auto d = cone_decompose(polynomial({0.0}), h, kSpec, 0.0, 1.0);
  EXPECT_EQ(d.lambda, 0.0);
  EXPECT_EQ(d.v, 0.0);
  EXPECT_EQ(d.delta, 0.0);
  EXPECT_LT(d.identity_error, 1e-12);
  EXPECT_LT((d.h1.f - d.h2.f).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConeDecompose, ConstantObservable) {
  const auto h = sample_function(geometric_grid(300), [](double) { return 1.0; });
  for (double c : {0.7, -0.7}) {
    const auto d = cone_decompose(polynomial({c}), h, kSpec, 0.0, 1.0);
    EXPECT_LT((d.h1.f - d.h2.f).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(d.m1.member);
    EXPECT_TRUE(d.m2.member);
  }
}

TEST(ConeDecompose, CenteredIdentity) {
  const auto h = sample_function(geometric_grid(600), [](double) { return 1.0; });
  const auto d = cone_decompose(polynomial({-0.5, 1.0}), h, kSpec, 1.0, 1.0);
  EXPECT_TRUE(d.m1.member);
  EXPECT_TRUE(d.m2.member);
  EXPECT_GE(std::min(d.m1.worst_margin, d.m2.worst_margin), -1e-10);
  EXPECT_LT(d.identity_error, 1e-12);
  EXPECT_LT(d.integral_gap, 1e-12);
  EXPECT_LE(d.lambda, -1.0);  // h1 can only decrease if lambda absorbs phi's slope
  // independent re-check of both formulas
  for (Eigen::Index i = 0; i < h.size(); i += 37) {
    const double x = h.x[i];
    EXPECT_NEAR(d.h1.f[i], (x - 0.5 + d.lambda * x + d.v) + d.delta, 1e-12);
    EXPECT_NEAR(d.h2.f[i], (d.lambda * x + d.v) + d.delta + d.phi_h_integral, 1e-12);
  }
}

TEST(ConeDecompose, RandomLipschitzProperty) {
  std::mt19937_64 gen(2024);
  const auto h = sample_function(geometric_grid(400), [](double) { return 1.0; });
  for (int t = 0; t < 20; ++t) {
    const auto phi = random_lipschitz(gen, 2.0);
    const auto d = cone_decompose(phi, h, kSpec, 2.0, 1.0);
    EXPECT_LT(d.identity_error, 1e-12);
    EXPECT_LT(d.integral_gap, 1e-12);
    EXPECT_TRUE(d.m1.member && d.m2.member);
  }
}

TEST(ConeDecompose, RejectsBadBounds) {
  const auto h = sample_function(geometric_grid(50), [](double) { return 1.0; });
  EXPECT_THROW(cone_decompose(polynomial({0.0, 3.0}), h, kSpec, 1.0, 1.0), ValidationError);
  EXPECT_THROW(cone_decompose(polynomial({0.0, 1.0}), h, kSpec, 1.0, 0.5), ValidationError);
}

TEST(ConeDecompose, OutOfBoxReportsSearchFailure) {
  // phi = -1000 needs v + delta >= 1000, far beyond the box scaled by K = 0.
  const auto h = sample_function(geometric_grid(200), [](double) { return 1.0; });
  ConeSearchOptions quick;
  quick.levels = 2;
  try {
    cone_decompose(polynomial({-1000.0}), h, kSpec, 0.0, 1.0, quick);
    FAIL();
  } catch (const SearchFailure& e) {
    EXPECT_NE(e.best().find("lambda="), std::string::npos);
  }
}

TEST(ToBins, ExactForLinear) {
  const auto g = sample_function(geometric_grid(50, 1e-6), [](double x) { return 3.0 - 2.0 * x; });
  const auto b = to_bins(g, 16);
  for (Eigen::Index i = 0; i < 16; ++i) {
    const double c = (i + 0.5) / 16.0;
    if (i > 0) {
      EXPECT_NEAR(b[i], 3.0 - 2.0 * c, 1e-12);
    }
  }
  EXPECT_NEAR(integral(b), 2.0, 1e-9);
}

TEST(ConeInvariance, ConstantUnderDoubling) {
  const auto rep = check_cone_invariance(PMParam(0.0, 0.3), kSpec, {power_family_sample(0.0, 0.0, 1024)}, 1024);
  EXPECT_EQ(rep.passed, 1u);
}

TEST(ConeInvariance, PowerFamilyUnderIntermittentMaps) {
  std::vector<GridFunction> samples;
  for (double s : {0.0, 0.05, 0.1, 0.15, 0.2, 0.25})
    for (double c : {0.0, 0.5, 1.0}) samples.push_back(power_family_sample(s, c, 8192));
  for (double beta : {0.1, 0.25}) {
    const auto rep = check_cone_invariance(PMParam(beta, 0.3), kSpec, samples, 8192);
    EXPECT_GE(rep.pass_rate, 0.95) << beta;
    EXPECT_GE(rep.worst_margin, -1e-6) << beta;
  }
}

TEST(ConeInvariance, SmallAIsRecordedNotFatal) {
  std::vector<GridFunction> samples;
  for (double s : {0.0, 0.1, 0.25}) samples.push_back(power_family_sample(s, 0.0, 2048));
  const auto big = check_cone_invariance(PMParam(0.25, 0.3), kSpec, samples, 2048);
  const auto small = check_cone_invariance(PMParam(0.25, 0.3), ConeSpec(1.01, 0.25), samples, 2048);
  EXPECT_EQ(small.samples, 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(small.images[i].bound, big.images[i].bound);
}
