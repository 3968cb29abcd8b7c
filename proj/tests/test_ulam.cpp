#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vasiplab/decay.hpp"
#include "vasiplab/ulam.hpp"

using namespace vasiplab;

namespace {

Observable x_minus_half() { return Observable::scalar(polynomial({-0.5, 1.0})); }

// int (x - 1/2)((2^n x mod 1) - 1/2) dx by Simpson's rule on each of the 2^n
// linear pieces of the shift (exact there, since the integrand is quadratic).
double doubling_correlation(int n) {
  const double pieces = std::ldexp(1.0, n);
  const double h = 1.0 / pieces;
  double acc = 0.0;
  for (double k = 0; k < pieces; k += 1.0) {
    const double a = k * h;
    auto f = [&](double x) { return (x - 0.5) * (pieces * (x - a) - 0.5); };
    acc += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
  }
  return acc;
}

}  // namespace

TEST(Ulam, TwoBinDoublingMatrix) {
  const auto op = ulam_matrix(PMParam(0.0, 0.3), 2);
  const Eigen::MatrixXd P = Eigen::MatrixXd(op.matrix());
  EXPECT_NEAR(P(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(P(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(P(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(P(1, 1), 0.5, 1e-15);
  const DensityGrid f = (DensityGrid(2) << 2.0, 0.0).finished();
  const DensityGrid out = apply(op, f);
  EXPECT_NEAR(out[0], 1.0, 1e-15);
  EXPECT_NEAR(out[1], 1.0, 1e-15);
  const DensityGrid one = apply(op, DensityGrid::Ones(2));
  EXPECT_NEAR(one[0], 1.0, 1e-15);
  EXPECT_NEAR(one[1], 1.0, 1e-15);
}

TEST(Ulam, RowStochasticAndNonNegative) {
  for (double b : {0.0, 0.1, 0.25, 0.45})
    for (Eigen::Index N : {2, 3, 17, 256, 1000}) {
      const auto op = ulam_matrix(PMParam(b, 0.49), N);
      Eigen::VectorXd rows = Eigen::VectorXd::Zero(N);
      for (Eigen::Index i = 0; i < op.matrix().outerSize(); ++i)
        for (UlamOperator::SpMat::InnerIterator it(op.matrix(), i); it; ++it) {
          EXPECT_GE(it.value(), 0.0);
          rows[it.row()] += it.value();
        }
      EXPECT_LT((rows.array() - 1.0).abs().maxCoeff(), 1e-12) << b << " " << N;
    }
}

TEST(Ulam, MatchesDirectPreimageMeasure) {
  // Independent check: estimate m(B_i n T^-1 B_j) N by fine sampling of B_i.
  const double beta = 0.3;
  const Eigen::Index N = 16;
  const auto op = ulam_matrix(PMParam(beta, 0.35), N);
  const Eigen::MatrixXd P = Eigen::MatrixXd(op.matrix());
  const int fine = 200000;
  for (Eigen::Index i : {0, 3, 7, 8, 15}) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(N);
    for (int s = 0; s < fine; ++s) {
      const double x = (static_cast<double>(i) + (s + 0.5) / fine) / N;
      const double y = pm_step(beta, x);
      row[std::min<Eigen::Index>(N - 1, static_cast<Eigen::Index>(y * N))] += 1.0 / fine;
    }
    for (Eigen::Index j = 0; j < N; ++j) EXPECT_NEAR(P(i, j), row[j], 2e-4) << i << "," << j;
  }
}

TEST(Ulam, IntegralPreservation) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  const auto op = ulam_matrix(PMParam(0.25, 0.3), 1024);
  DensityGrid f(1024);
  for (auto& v : f) v = u(gen);
  for (int k = 0; k < 20; ++k) {
    const DensityGrid g = op.apply(f);
    EXPECT_NEAR(integral(g), integral(f), 1e-12);
    f = g;
  }
}

TEST(Ulam, DimensionMismatch) {
  const auto op = ulam_matrix(PMParam(0.1, 0.3), 8);
  EXPECT_THROW(op.apply(DensityGrid::Ones(9)), DimensionMismatch);
  auto a = std::make_shared<const UlamOperator>(PMParam(0.1, 0.3), 8);
  auto b = std::make_shared<const UlamOperator>(PMParam(0.1, 0.3), 9);
  EXPECT_THROW(compose_sequential({a, b}), DimensionMismatch);
}

TEST(Ulam, ComposeSequentialOrder) {
  auto A = std::make_shared<const UlamOperator>(PMParam(0.1, 0.3), 64);
  auto B = std::make_shared<const UlamOperator>(PMParam(0.25, 0.3), 64);
  DensityGrid f = bin_centers(64).array().square();
  EXPECT_EQ(compose_sequential({}).apply(f), f);
  EXPECT_EQ(compose_sequential({A}).apply(f), A->apply(f));
  const DensityGrid two = compose_sequential({A, B}).apply(f);
  const DensityGrid direct = B->apply(A->apply(f));
  EXPECT_LT((two - direct).cwiseAbs().maxCoeff(), 1e-15);
  const DensityGrid reversed = A->apply(B->apply(f));
  EXPECT_GT((two - reversed).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ulam, DoublingUniformIsExactlyStationary) {
  const auto op = ulam_matrix(PMParam(0.0, 0.3), 4096);
  DensityGrid f = DensityGrid::Ones(4096);
  for (int k = 0; k < 10; ++k) {
    f = op.apply(f);
    EXPECT_LT((f.array() - 1.0).abs().maxCoeff(), 1e-13);
  }
}

TEST(Ulam, InvariantDensityIsFixed) {
  const auto op = ulam_matrix(PMParam(0.25, 0.3), 2048);
  const DensityGrid h = invariant_density(op);
  EXPECT_NEAR(integral(h), 1.0, 1e-12);
  EXPECT_LT(l1_norm(op.apply(h) - h), 1e-10);
  // the density blows up at the neutral fixed point
  EXPECT_GT(h[0], h[2047]);
}

TEST(Ulam, CesaroAveragesConverge) {
  const auto op = ulam_matrix(PMParam(0.25, 0.3), 1024);
  DensityGrid f = DensityGrid::Ones(1024), avg = DensityGrid::Zero(1024);
  DensityGrid prev;
  double last_gap = 1e9;
  for (int n = 1; n <= 400; ++n) {
    f = op.apply(f);
    avg += (f - avg) / n;
    if (n % 100 == 0) {
      if (prev.size()) {
        const double gap = l1_norm(avg - prev);
        EXPECT_LT(gap, last_gap);
        last_gap = gap;
      }
      prev = avg;
    }
  }
}

TEST(Decay, DoublingCorrelationMatchesRiemannOracle) {
  // N = 4095 avoids the dyadic alignment that makes the doubling Ulam matrix
  // nilpotent on mean-zero grid functions.
  const auto s = MapSchedule::constant(0.0, 0.3);
  const auto rep = check_decay(s, x_minus_half(), DecayKind::A4, 0, 0, {1, 20}, 4095);
  ASSERT_EQ(rep.correlations.size(), 20u);
  for (const auto& [n, c] : rep.correlations) {
    const double oracle = doubling_correlation(static_cast<int>(n));
    EXPECT_NEAR(c / oracle, 1.0, 0.1) << "n=" << n;
    EXPECT_NEAR(oracle / (std::ldexp(1.0, -static_cast<int>(n)) / 12.0), 1.0, 1e-9);
  }
  EXPECT_LT(rep.fitted_slope, -3.0);
  EXPECT_TRUE(rep.pass);
}

TEST(Decay, DyadicGridIsExactThenNilpotent) {
  const auto s = MapSchedule::constant(0.0, 0.3);
  const auto rep = check_decay(s, x_minus_half(), DecayKind::A4, 0, 0, {1, 14}, 4096);
  for (const auto& [n, c] : rep.correlations) {
    const double ref = std::ldexp(1.0, -static_cast<int>(n)) / 12.0;
    if (n <= 10) {
      EXPECT_NEAR(c / ref, 1.0, 0.1) << n;
    }
    if (n >= 12) {
      EXPECT_LT(std::abs(c), 1e-14) << n;
    }
  }
  // L1 norm of P^n(x - 1/2) is 2^-n / 4 while the grid resolves it
  for (const auto& [n, v] : rep.points)
    if (n <= 6) {
      EXPECT_NEAR(v / (std::ldexp(1.0, -static_cast<int>(n)) / 4.0), 1.0, 0.01);
    }
}

TEST(Decay, ConstantObservableVanishes) {
  const auto rep = check_decay(MapSchedule::constant(0.25, 0.3), Observable::scalar(polynomial({3.0})),
                               DecayKind::A4, 0, 0, {1, 30}, 1024);
  for (const auto& [n, v] : rep.points) EXPECT_LT(v, 1e-12);
  EXPECT_TRUE(rep.pass);
}

TEST(Decay, IntermittentSlope) {
  const auto s = MapSchedule::constant(0.25, 0.3);
  const auto rep = check_decay(s, Observable::scalar(polynomial({0.0, 1.0})), DecayKind::A4, 0, 0, {20, 200}, 4096);
  EXPECT_DOUBLE_EQ(rep.target_slope, -3.0);
  EXPECT_LE(rep.fitted_slope, -2.0);
  EXPECT_TRUE(rep.pass);
}

TEST(Decay, NonStationaryKindsDecay) {
  const auto s = MapSchedule::periodic({0.1, 0.25}, 0.3);
  const Observable phi({polynomial({-0.5, 1.0}), polynomial({0.0, 0.0, 1.0})});
  for (auto kind : {DecayKind::A1, DecayKind::A2, DecayKind::A3}) {
    const auto rep = check_decay(s, phi, kind, 5, 3, {5, 120}, 2048);
    EXPECT_TRUE(rep.pass) << to_string(kind) << " slope " << rep.fitted_slope;
    EXPECT_LT(rep.points.back().second, rep.points.front().second);
  }
}

TEST(Decay, StationaryKindsNeedStationarySchedule) {
  EXPECT_THROW(check_decay(MapSchedule::periodic({0.1, 0.2}, 0.3), x_minus_half(), DecayKind::A5, 0, 0, {1, 5}, 64),
               ValidationError);
  for (auto kind : {DecayKind::A5, DecayKind::A6}) {
    const auto rep = check_decay(MapSchedule::constant(0.2, 0.3), x_minus_half(), kind, 0, 2, {10, 100}, 2048);
    EXPECT_TRUE(rep.pass) << to_string(kind);
  }
}

TEST(ConditionalExpectation, TrivialCases) {
  const auto s = MapSchedule::constant(0.25, 0.3);
  const DensityGrid f = bin_centers(512).array().sin();
  const auto ce0 = conditional_expectation(s, f, 0);
  EXPECT_EQ(ce0.g, f);
  const auto cec = conditional_expectation(s, DensityGrid::Constant(512, 2.5), 7);
  EXPECT_LT((cec.g.array() - 2.5).abs().maxCoeff(), 1e-12);
}

TEST(ConditionalExpectation, DoublingThreeSymbolsBruteForce) {
  // E(f | T^-3 B) is g o T^3 with g(y) the average of f over the 8 preimages (w + y) / 8.
  const Eigen::Index N = 4096;
  const DensityGrid f = bin_centers(N).array() - 0.5;
  const auto ce = conditional_expectation(MapSchedule::constant(0.0, 0.3), f, 3);
  const DensityGrid y = bin_centers(N);
  double l1 = 0.0;
  for (Eigen::Index b = 0; b < N; ++b) {
    double avg = 0.0;
    for (int w = 0; w < 8; ++w) avg += ((w + y[b]) / 8.0 - 0.5) / 8.0;
    EXPECT_NEAR(ce.g[b], avg, 1e-3);
    l1 += std::abs(avg) / static_cast<double>(N);
  }
  EXPECT_NEAR(ce.l1, l1, 1e-6);
  EXPECT_NEAR(ce.l1, 1.0 / 32.0, 1e-6);
}

TEST(ConditionalExpectation, L1Contraction) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  for (auto s : {MapSchedule::constant(0.25, 0.3), MapSchedule::periodic({0.05, 0.3, 0.15}, 0.35)}) {
    DensityGrid f(1000);
    for (auto& v : f) v = z(gen);
    for (std::int64_t n : {1, 2, 5, 20, 100}) EXPECT_LE(conditional_expectation(s, f, n).l1, l1_norm(f) + 1e-10);
  }
}

TEST(CFDeviation, ZeroFrequencyIsExactlyZero) {
  const auto dev = estimate_cf_deviation(MapSchedule::constant(0.0, 0.3), x_minus_half(), 1, 64,
                                         Eigen::VectorXd::Zero(1), 1024, {2000, 1, 16, 0});
  EXPECT_EQ(dev.value, 0.0);
  EXPECT_TRUE(dev.resolved);
}

TEST(CFDeviation, GaussianSurrogateWithinNoise) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  const int m = 10000;
  Eigen::MatrixXd X(m, 2);
  std::vector<int> labels(m);
  std::uniform_int_distribution<int> lab(0, 15);
  for (int r = 0; r < m; ++r) {
    X(r, 0) = z(gen);
    X(r, 1) = 0.5 * z(gen);
    labels[static_cast<std::size_t>(r)] = lab(gen);
  }
  const auto dev = cf_deviation_from_samples(X, labels, 16, Eigen::Vector2d(1.0, -0.5));
  EXPECT_LT(dev.value, 3.0 * dev.standard_error + 0.01);
}

TEST(CFDeviation, DoublingBlockBelowTenth) {
  const auto dev = estimate_cf_deviation(MapSchedule::constant(0.0, 0.3), x_minus_half(), 1, 256,
                                         Eigen::VectorXd::Ones(1), 4096, {10000, 17, 16, 0});
  EXPECT_LT(dev.value, 0.1);
  EXPECT_GT(dev.standard_error, 0.0);
}

TEST(CFDeviation, DependentSurrogateIsResolved) {
  // X fully determined by the conditioning label: the deviation is order one.
  const int m = 4000;
  Eigen::MatrixXd X(m, 1);
  std::vector<int> labels(m);
  for (int r = 0; r < m; ++r) {
    labels[static_cast<std::size_t>(r)] = r % 4;
    X(r, 0) = (r % 4) - 1.5;
  }
  const auto dev = cf_deviation_from_samples(X, labels, 4, Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_GT(dev.value, 0.3);
  EXPECT_TRUE(dev.resolved);
}
