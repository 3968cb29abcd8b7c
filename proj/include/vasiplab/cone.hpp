#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "json.hpp"
#include "observable.hpp"
#include "pm_map.hpp"
#include "ulam.hpp"

namespace vasiplab {

struct ConeSpec {
  double a = 20.0;
  double alpha = 0.25;

  ConeSpec() = default;
  ConeSpec(double a_, double alpha_) : a(a_), alpha(alpha_) {
    if (!(a > 1.0)) throw ValidationError("cone parameter a must exceed 1", "/a");
    if (!(alpha > 0.0 && alpha < 0.5)) throw ValidationError("cone alpha must lie in (0, 1/2)", "/alpha");
  }
};

/// Samples f(x_i) on increasing points of (0, 1] with quadrature weights w_i
/// summing to 1, so that sum w_i f_i approximates the Lebesgue integral.
struct GridFunction {
  Eigen::VectorXd x;
  Eigen::VectorXd w;
  Eigen::VectorXd f;

  Eigen::Index size() const noexcept { return x.size(); }
  double integral() const { return w.dot(f); }

  GridFunction with_values(Eigen::VectorXd values) const { return {x, w, std::move(values)}; }
};

/// Uniform bin centers with weights 1/N (matches the Ulam representation).
inline GridFunction uniform_grid(Eigen::Index n) {
  GridFunction g;
  g.x = bin_centers(n);
  g.w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  g.f = Eigen::VectorXd::Zero(n);
  return g;
}

/// Log-spaced points from x_min to 1. Trapezoid weights between points, plus
/// the interval [0, x_min] credited to the first point.
inline GridFunction geometric_grid(Eigen::Index n, double x_min = 1e-8) {
  if (n < 2) throw ValidationError("geometric grid needs at least two points");
  GridFunction g;
  g.x.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    g.x[i] = std::exp(std::log(x_min) * (1.0 - static_cast<double>(i) / static_cast<double>(n - 1)));
  g.x[n - 1] = 1.0;
  g.w = Eigen::VectorXd::Zero(n);
  g.w[0] = g.x[0];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = g.x[i + 1] - g.x[i];
    g.w[i] += 0.5 * h;
    g.w[i + 1] += 0.5 * h;
  }
  g.f = Eigen::VectorXd::Zero(n);
  return g;
}

template <class Fn>
GridFunction sample_function(const GridFunction& grid, Fn&& fn) {
  Eigen::VectorXd v(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) v[i] = fn(grid.x[i]);
  return grid.with_values(std::move(v));
}

enum class ConeCondition { none, nonnegative, decreasing, weighted_increasing, bound };

inline std::string to_string(ConeCondition c) {
  switch (c) {
    case ConeCondition::none: return "none";
    case ConeCondition::nonnegative: return "nonnegative";
    case ConeCondition::decreasing: return "decreasing";
    case ConeCondition::weighted_increasing: return "weighted_increasing";
    case ConeCondition::bound: return "bound";
  }
  return "none";
}

/// Signed slacks per condition, each divided by the integral of f (by 1 when
/// the integral is not positive). Non-negative means satisfied.
struct ConeMembership {
  bool member = false;
  double worst_margin = 0.0;
  ConeCondition failing_condition = ConeCondition::none;
  double nonnegative = 0.0;
  double decreasing = 0.0;
  double weighted_increasing = 0.0;
  double bound = 0.0;
  double integral = 0.0;
};

inline ConeMembership cone_membership(const GridFunction& g, const ConeSpec& spec, double tol = 1e-10) {
  const Eigen::Index n = g.size();
  if (n == 0) throw ValidationError("cone membership needs a non-empty grid");
  if (g.x.minCoeff() <= 0.0) throw DomainError("cone grids must avoid x = 0");
  ConeMembership m;
  m.integral = g.integral();
  const double scale = m.integral > 0.0 ? m.integral : 1.0;
  const double inf = std::numeric_limits<double>::infinity();
  m.nonnegative = g.f.minCoeff() / scale;
  m.decreasing = inf;
  m.weighted_increasing = inf;
  m.bound = inf;
  double prev_w = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = std::pow(g.x[i], spec.alpha + 1.0) * g.f[i];
    if (i > 0) {
      m.decreasing = std::min(m.decreasing, (g.f[i - 1] - g.f[i]) / scale);
      m.weighted_increasing = std::min(m.weighted_increasing, (wi - prev_w) / scale);
    }
    prev_w = wi;
    m.bound = std::min(m.bound, (spec.a * std::pow(g.x[i], -spec.alpha) * m.integral - g.f[i]) / scale);
  }
  if (n == 1) m.decreasing = m.weighted_increasing = 0.0;
  const std::pair<double, ConeCondition> all[] = {{m.nonnegative, ConeCondition::nonnegative},
                                                  {m.decreasing, ConeCondition::decreasing},
                                                  {m.weighted_increasing, ConeCondition::weighted_increasing},
                                                  {m.bound, ConeCondition::bound}};
  m.worst_margin = inf;
  for (const auto& [v, c] : all)
    if (v < m.worst_margin) {
      m.worst_margin = v;
      m.failing_condition = c;
    }
  m.member = m.worst_margin >= -tol;
  if (m.member) m.failing_condition = ConeCondition::none;
  return m;
}

inline nlohmann::json to_json(const ConeMembership& m, const ConeSpec& spec) {
  return {{"a", spec.a},
          {"alpha", spec.alpha},
          {"condition_margins",
           {{"nonnegative", m.nonnegative},
            {"decreasing", m.decreasing},
            {"weighted_increasing", m.weighted_increasing},
            {"bound", m.bound}}},
          {"worst_margin", m.worst_margin},
          {"failing_condition", to_string(m.failing_condition)},
          {"member", m.member}};
}

struct ConeDecomposition {
  GridFunction h1, h2;
  double lambda = 0.0, v = 0.0, delta = 0.0;
  double phi_h_integral = 0.0;
  ConeMembership m1, m2;
  double identity_error = 0.0;  // max |h1 - h2 - (phi h - int phi h)|
  double integral_gap = 0.0;    // |int h1 - int h2|
  std::size_t evaluations = 0;
};

struct ConeSearchOptions {
  int points_per_axis = 11;
  int levels = 6;
  double shrink = 0.25;
  double tol = 1e-10;
};

/// Constructive form of the cone splitting phi h - int phi h = h1 - h2 with
/// h1 = (phi + lambda X + v) h + delta and h2 = (lambda X + v) h + delta + int phi h.
/// Searches lambda in [-10S, 0] and v, delta in [0, 10S] with S = max(K, 1),
/// minimizing |lambda| + v + delta subject to both parts lying in the cone.
inline ConeDecomposition cone_decompose(const Component& phi, const GridFunction& h, const ConeSpec& spec, double K,
                                        double M, const ConeSearchOptions& opt = {}) {
  if (!(K >= 0.0)) throw ValidationError("Lipschitz bound K must be non-negative");
  if (phi.lipschitz > K * (1.0 + 1e-12)) throw ValidationError("observable Lipschitz constant exceeds K");
  if (h.f.cwiseAbs().dot(h.w) > M * (1.0 + 1e-12)) throw ValidationError("h has L1 norm above M");

  const Eigen::Index n = h.size();
  Eigen::VectorXd ph(n), xh(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ph[i] = phi(h.x[i]) * h.f[i];
    xh[i] = h.x[i] * h.f[i];
  }
  const double iph = h.w.dot(ph);

  ConeDecomposition best;
  auto build = [&](double lam, double v, double del) {
    ConeDecomposition c;
    c.lambda = lam;
    c.v = v;
    c.delta = del;
    c.phi_h_integral = iph;
    const Eigen::VectorXd base = lam * xh + v * h.f + Eigen::VectorXd::Constant(n, del);
    c.h1 = h.with_values(ph + base);
    c.h2 = h.with_values(base + Eigen::VectorXd::Constant(n, iph));
    c.m1 = cone_membership(c.h1, spec, opt.tol);
    c.m2 = cone_membership(c.h2, spec, opt.tol);
    return c;
  };
  auto cost = [](const ConeDecomposition& c) { return std::abs(c.lambda) + c.v + c.delta; };
  auto feasible = [](const ConeDecomposition& c) { return c.m1.member && c.m2.member; };
  auto worst = [](const ConeDecomposition& c) { return std::min(c.m1.worst_margin, c.m2.worst_margin); };

  const double S = 10.0 * std::max(K, 1.0);
  double lo[3] = {-S, 0.0, 0.0}, hi[3] = {0.0, S, S};
  bool have_feasible = false;
  ConeDecomposition fallback;
  double fallback_margin = -std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
  const int P = std::max(2, opt.points_per_axis);
  for (int level = 0; level < opt.levels; ++level) {
    for (int a = 0; a < P; ++a)
      for (int b = 0; b < P; ++b)
        for (int c = 0; c < P; ++c) {
          const double lam = lo[0] + (hi[0] - lo[0]) * a / (P - 1);
          const double v = lo[1] + (hi[1] - lo[1]) * b / (P - 1);
          const double del = lo[2] + (hi[2] - lo[2]) * c / (P - 1);
          if (have_feasible && std::abs(lam) + v + del >= cost(best)) continue;
          ConeDecomposition cand = build(lam, v, del);
          ++evals;
          if (feasible(cand)) {
            best = std::move(cand);
            have_feasible = true;
          } else if (!have_feasible && worst(cand) > fallback_margin) {
            fallback_margin = worst(cand);
            fallback = std::move(cand);
          }
        }
    // Zoom in around the incumbent: the new box is half as wide per axis.
    const ConeDecomposition& centre = have_feasible ? best : fallback;
    const double centre_pt[3] = {centre.lambda, centre.v, centre.delta};
    for (int k = 0; k < 3; ++k) {
      const double half = (hi[k] - lo[k]) * opt.shrink;
      const double box_lo = k == 0 ? -S : 0.0, box_hi = k == 0 ? 0.0 : S;
      lo[k] = std::max(box_lo, centre_pt[k] - half);
      hi[k] = std::min(box_hi, centre_pt[k] + half);
    }
  }
  if (!have_feasible) {
    std::ostringstream os;
    os << "lambda=" << fallback.lambda << " v=" << fallback.v << " delta=" << fallback.delta
       << " margins=(" << fallback.m1.worst_margin << ", " << fallback.m2.worst_margin << ")";
    throw SearchFailure("no cone decomposition inside the search box", os.str());
  }
  best.evaluations = evals;
  const Eigen::VectorXd target = ph.array() - iph;
  best.identity_error = ((best.h1.f - best.h2.f) - target).cwiseAbs().maxCoeff();
  best.integral_gap = std::abs(best.h1.integral() - best.h2.integral());
  return best;
}

/// Bin averages of the piecewise-linear interpolant of g over N uniform bins
/// (constant continuation to the left of the first and right of the last point).
inline DensityGrid to_bins(const GridFunction& g, Eigen::Index N) {
  const Eigen::Index n = g.size();
  // cumulative integral at each grid point, starting from 0 at x = 0
  Eigen::VectorXd F(n);
  F[0] = g.x[0] * g.f[0];
  for (Eigen::Index i = 1; i < n; ++i) F[i] = F[i - 1] + 0.5 * (g.f[i] + g.f[i - 1]) * (g.x[i] - g.x[i - 1]);
  auto cumulative = [&](double y) {
    if (y <= g.x[0]) return y * g.f[0];
    if (y >= g.x[n - 1]) return F[n - 1] + (y - g.x[n - 1]) * g.f[n - 1];
    const auto it = std::upper_bound(g.x.data(), g.x.data() + n, y);
    const auto i = static_cast<Eigen::Index>(it - g.x.data());
    const double t = y - g.x[i - 1];
    const double slope = (g.f[i] - g.f[i - 1]) / (g.x[i] - g.x[i - 1]);
    return F[i - 1] + t * (g.f[i - 1] + 0.5 * slope * t);
  };
  DensityGrid out(N);
  double prev = 0.0;
  for (Eigen::Index b = 0; b < N; ++b) {
    const double next = cumulative(static_cast<double>(b + 1) / static_cast<double>(N));
    out[b] = (next - prev) * static_cast<double>(N);
    prev = next;
  }
  return out;
}

/// Bin averages of c + x^-s on N uniform bins (exact).
inline GridFunction power_family_sample(double s, double c, Eigen::Index N) {
  GridFunction g = uniform_grid(N);
  const double dN = static_cast<double>(N);
  double prev = 0.0;
  for (Eigen::Index b = 0; b < N; ++b) {
    const double next = std::pow(static_cast<double>(b + 1) / dN, 1.0 - s) / (1.0 - s);
    g.f[b] = c + (next - prev) * dN;
    prev = next;
  }
  return g;
}

struct ConeInvarianceReport {
  std::size_t samples = 0;
  std::size_t passed = 0;
  double pass_rate = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<ConeMembership> images;
  double tolerance = 1e-6;
};

/// Applies the Ulam operator of p to each sample (as bin averages) and
/// re-tests cone membership of the image with the given tolerance.
inline ConeInvarianceReport check_cone_invariance(const PMParam& p, const ConeSpec& spec,
                                                  const std::vector<GridFunction>& samples, Eigen::Index n_bins,
                                                  double tolerance = 1e-6) {
  const UlamOperator op(p, n_bins);
  const GridFunction grid = uniform_grid(n_bins);
  ConeInvarianceReport rep;
  rep.tolerance = tolerance;
  for (const auto& s : samples) {
    const bool on_grid = s.size() == n_bins && (s.x - grid.x).cwiseAbs().maxCoeff() < 1e-15;
    const DensityGrid f = on_grid ? DensityGrid(s.f) : to_bins(s, n_bins);
    const auto m = cone_membership(grid.with_values(op.apply(f)), spec, tolerance);
    rep.worst_margin = std::min(rep.worst_margin, m.worst_margin);
    rep.passed += m.member;
    rep.images.push_back(m);
  }
  rep.samples = samples.size();
  rep.pass_rate = rep.samples ? static_cast<double>(rep.passed) / static_cast<double>(rep.samples) : 1.0;
  return rep;
}

}  // namespace vasiplab
