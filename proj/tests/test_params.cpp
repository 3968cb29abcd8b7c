#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "vasiplab/params.hpp"

using namespace vasiplab;

namespace {

// Half of the remaining room below 1, so gamma stays admissible near alpha = 1/2.
double safe_margin(double alpha, int d) { return 0.5 * (1.0 - vasip_gamma(alpha, d, 0.0).gamma_inf); }

const ConstraintResult& find(const std::vector<ConstraintResult>& v, const std::string& name) {
  const auto it = std::find_if(v.begin(), v.end(), [&](const auto& c) { return c.name == name; });
  if (it == v.end()) throw std::runtime_error("no constraint " + name);
  return *it;
}

}  // namespace

TEST(VasipGamma, QuarterReferencePoint) {
  const auto p = vasip_gamma(0.25, 1);
  EXPECT_DOUBLE_EQ(p.eps0, 1.0);
  EXPECT_DOUBLE_EQ(p.M, 0.0);
  // a-branches: 1/2, 4/7, 1/4; c-branches: 424/3, 1/3.
  EXPECT_NEAR(p.a_branches[0], 0.5, 1e-15);
  EXPECT_NEAR(p.a_branches[1], 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(p.a_branches[2], 0.25, 1e-15);
  EXPECT_EQ(p.a_branch, 1u);
  EXPECT_NEAR(p.a, 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(p.c, 424.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.c_branches[1], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(p.c_branch, 0u);
  EXPECT_NEAR(p.gamma_inf, 426.0 / 427.0, 1e-15);
  // Six-digit reference value; 426/427 itself is 0.9976581.
  EXPECT_NEAR(p.gamma_inf, 0.997655, 1e-5);
  EXPECT_NEAR(p.gamma, p.gamma_inf + 1e-4, 1e-15);
  EXPECT_DOUBLE_EQ(p.kappa, 2.0);
}

TEST(VasipGamma, PointFourReferencePoint) {
  const auto p = vasip_gamma(0.4, 1);
  EXPECT_NEAR(p.eps0, 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(p.M, 0.5, 1e-14);
  EXPECT_NEAR(p.a, 11.0 / 15.0, 1e-14);
  EXPECT_EQ(p.a_branch, 0u);
  EXPECT_NEAR(p.c, 302.75, 1e-10);
  EXPECT_NEAR(p.gamma_inf, 1214.0 / 1215.0, 1e-14);
  EXPECT_NEAR(p.gamma_inf, 0.99918, 5e-6);
}

TEST(VasipGamma, RationalPathAgrees) {
  for (double al : {0.25, 0.4, 0.1, 0.33, 0.49}) {
    for (int d : {1, 2, 3}) {
      const auto f = vasip_gamma(al, d, 0.0);
      const auto q = vasip_gamma_rational(al, d, 0.0);
      EXPECT_NEAR(f.gamma_inf, q.gamma_inf.convert_to<double>(), 1e-9) << al << ' ' << d;
      EXPECT_NEAR(f.c, q.c.convert_to<double>(), 1e-9 * f.c) << al << ' ' << d;
      EXPECT_NEAR(f.a, q.a.convert_to<double>(), 1e-12) << al << ' ' << d;
      EXPECT_EQ(f.a_branch, q.a_branch);
      EXPECT_EQ(f.c_branch, q.c_branch);
    }
  }
  // alpha = 1/4 is exact in binary, so the rational path reproduces the closed form exactly.
  const auto q = vasip_gamma_rational(0.25, 1, 0.0);
  EXPECT_EQ(q.gamma_inf, Rational(426, 427));
  EXPECT_EQ(q.c, Rational(424, 3));
  EXPECT_EQ(q.a, Rational(4, 7));
}

TEST(VasipGamma, SmallAlphaLimit) {
  for (double al : {1e-3, 1e-6, 1e-9}) {
    const auto p = vasip_gamma(al, 1);
    EXPECT_DOUBLE_EQ(p.eps0, 1.0);
    EXPECT_DOUBLE_EQ(p.M, 0.0);
    EXPECT_NEAR(p.a, 4.0 / 7.0, 1e-15);
    EXPECT_NEAR(p.c_branches[1], 1.0 / 3.0, 1e-15);
    EXPECT_EQ(p.c_branch, 0u);
    EXPECT_LT(p.gamma_inf, 1.0);
  }
}

TEST(VasipGamma, DomainErrors) {
  EXPECT_THROW(vasip_gamma(0.0, 1), DomainError);
  EXPECT_THROW(vasip_gamma(0.5, 1), DomainError);
  EXPECT_THROW(vasip_gamma(-0.1, 1), DomainError);
  EXPECT_THROW(vasip_gamma(0.25, 0), DomainError);
  EXPECT_THROW(vasip_gamma(0.25, 1, -1e-6), DomainError);
  EXPECT_THROW(vasip_gamma(0.25, 1, 0.01), DomainError);  // pushes gamma past 1
}

TEST(ConstraintChain, QuarterHoldsWithPositiveSlack) {
  const auto r = check_constraint_chain(vasip_gamma(0.25, 1, 1e-4));
  ASSERT_EQ(r.constraints.size(), 7u);
  for (const auto& c : r.constraints) {
    EXPECT_TRUE(c.holds) << c.name;
    EXPECT_GT(c.slack, 0.0) << c.name;
  }
  EXPECT_TRUE(r.all_hold);
  EXPECT_DOUBLE_EQ(r.v, *std::min_element(r.v_branches.begin(), r.v_branches.end()));
}

TEST(ConstraintChain, HoldsAcrossAlphaGridAndDimensions) {
  for (int i = 1; i <= 50; ++i) {
    const double al = 0.49 * i / 50.0;
    for (int d : {1, 2, 3}) {
      const auto p = vasip_gamma(al, d, safe_margin(al, d));
      const auto r = check_constraint_chain(p);
      EXPECT_TRUE(r.all_hold) << al << ' ' << d;
      EXPECT_GT(p.a, 0.5);
      EXPECT_LT(p.a, 1.0);
      EXPECT_GT(p.c, 1.0);
      EXPECT_NEAR(p.eps0, std::min(1.0, 2.0 - 2.0 * al / (1.0 - al)), 1e-15);
    }
  }
}

TEST(ConstraintChain, GammaInfNonDecreasingInDimension) {
  for (int i = 1; i <= 50; ++i) {
    const double al = 0.49 * i / 50.0;
    double prev = 0.0;
    for (int d = 1; d <= 6; ++d) {
      const double g = vasip_gamma(al, d, 0.0).gamma_inf;
      EXPECT_GE(g, prev) << al << ' ' << d;
      prev = g;
    }
  }
}

TEST(ConstraintChain, ZeroMarginIsBoundary) {
  const auto r = check_constraint_chain(vasip_gamma(0.25, 1, 0.0));
  EXPECT_FALSE(r.all_hold);
  EXPECT_TRUE(find(r.constraints, "maximal_moment").boundary);
  EXPECT_TRUE(find(r.intermediate, "moment").boundary);
  EXPECT_FALSE(find(r.constraints, "maximal_moment").holds);
  EXPECT_FALSE(find(r.constraints, "gaussian_tail").boundary);

  const auto q = check_constraint_chain(vasip_gamma_rational(0.25, 1, 0.0));
  EXPECT_EQ(find(q.constraints, "maximal_moment").slack, 0.0);
  EXPECT_TRUE(find(q.constraints, "maximal_moment").boundary);
}

TEST(ConstraintChain, GammaAtBlockRatioFailsMaximalMoment) {
  auto p = vasip_gamma(0.25, 1);
  p.gamma = p.c / (p.c + 1.0);
  const auto r = check_constraint_chain(p);
  EXPECT_FALSE(find(r.constraints, "maximal_moment").holds);
  EXPECT_LT(find(r.constraints, "maximal_moment").slack, 0.0);
  EXPECT_FALSE(r.all_hold);
}

TEST(CltGamma1, ReferenceValues) {
  const auto g = clt_gamma1_t<double>(0.25);
  EXPECT_DOUBLE_EQ(g.eps0, 1.0);
  EXPECT_NEAR(g.a_branches[0], 0.25, 1e-15);
  EXPECT_NEAR(g.a_branches[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(g.a_branches[2], 4.0 / 9.0, 1e-15);
  EXPECT_EQ(g.a_branch, 2u);
  EXPECT_NEAR(g.gamma1, 22.0 / 27.0, 1e-15);
  EXPECT_NEAR(clt_gamma1(0.1), 22.0 / 27.0, 1e-15);
  EXPECT_EQ(clt_gamma1_t<Rational>(Rational(1, 4)).gamma1, Rational(22, 27));
  EXPECT_THROW(clt_gamma1(0.5), DomainError);
}

TEST(CltGamma1, BelowOneAndBelowVasipExponent) {
  for (int i = 1; i <= 50; ++i) {
    const double al = 0.49 * i / 50.0;
    const double g1 = clt_gamma1(al);
    EXPECT_LT(g1, 1.0) << al;
    EXPECT_LE(g1, vasip_gamma(al, 1, 0.0).gamma_inf) << al;
  }
}

TEST(ParamsJson, BranchAttribution) {
  const auto j = to_json(vasip_gamma(0.25, 1));
  EXPECT_EQ(j["a"]["attained_by"], "moment_doubling");
  EXPECT_EQ(j["c"]["attained_by"], "block_growth");
  EXPECT_NEAR(j["gamma_inf"].get<double>(), 426.0 / 427.0, 1e-15);
  const auto q = to_json(vasip_gamma_rational(0.25, 1, 0.0));
  EXPECT_EQ(q["gamma_inf"], "426/427");
  const auto c = to_json(check_constraint_chain(vasip_gamma(0.25, 1)));
  EXPECT_EQ(c["constraints"].size(), 7u);
  EXPECT_TRUE(c["all_hold"].get<bool>());
}
