#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <boost/multiprecision/gmp.hpp>

#include "error.hpp"
#include "json.hpp"

namespace vasiplab {

using Rational = boost::multiprecision::mpq_rational;

namespace detail {

template <class T>
T tmax(const T& x, const T& y) {
  return x < y ? y : x;
}
template <class T>
T tmin(const T& x, const T& y) {
  return y < x ? y : x;
}

template <class T, std::size_t K>
std::size_t argmax(const std::array<T, K>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < K; ++i)
    if (v[best] < v[i]) best = i;
  return best;
}

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.convert_to<double>(); }

template <class T>
void check_alpha(const T& alpha) {
  if (!(alpha > 0 && alpha < T(1) / 2))
    throw DomainError("alpha must lie in (0, 1/2), got " + std::to_string(to_double(alpha)));
}

}  // namespace detail

template <class T>
struct BasicVasipParams {
  T alpha;
  int d = 1;
  T eps0;
  T M;  // max(3 - 1/alpha, 0)
  std::array<T, 3> a_branches;
  std::size_t a_branch = 0;
  T a;
  std::array<T, 2> c_branches;
  std::size_t c_branch = 0;
  T c;
  T kappa = T(2);
  T gamma_inf;
  T margin;
  T gamma;
};

using VasipParams = BasicVasipParams<double>;

template <class T>
T moment_eps0(const T& alpha) {
  return detail::tmin<T>(T(1), T(2) - T(2) * alpha / (T(1) - alpha));
}

template <class T>
T memory_exponent(const T& alpha) {
  return detail::tmax<T>(T(3) - T(1) / alpha, T(0));
}

/// Parameter chain (eps0, a, c, kappa, gamma) with gamma = gamma_inf + margin.
template <class T>
BasicVasipParams<T> vasip_gamma_t(const T& alpha, int d, const T& margin) {
  detail::check_alpha(alpha);
  if (d < 1) throw DomainError("dimension d must be at least 1");
  if (margin < 0) throw DomainError("margin must be non-negative");
  BasicVasipParams<T> p;
  p.alpha = alpha;
  p.d = d;
  p.eps0 = moment_eps0(alpha);
  p.M = memory_exponent(alpha);
  const T& e = p.eps0;
  const T& M = p.M;
  p.a_branches = {(e + T(2) * alpha) / ((T(1) - alpha) * (T(2) * e + T(2))),
                  (T(2) + T(2) * e) / (T(3) * e + T(4)),
                  ((T(2) + e) * (T(1) + M) - T(2)) / (T(2) + T(2) * e)};
  p.a_branch = detail::argmax(p.a_branches);
  p.a = p.a_branches[p.a_branch];
  p.c_branches = {(T(2) + e * p.a + (T(2) + e) * (T(8 * d) + T(12)) - T(2)) / (e * (T(1) - p.a)),
                  (T(1) - T(2) / (T(2) + e) + M) / (T(1) - M)};
  p.c_branch = detail::argmax(p.c_branches);
  p.c = p.c_branches[p.c_branch];
  p.gamma_inf = p.c / (p.c + T(1)) + T(2) / ((p.c + T(1)) * (T(2) + e));
  p.margin = margin;
  p.gamma = p.gamma_inf + margin;
  if (!(p.gamma < T(1)))
    throw DomainError("gamma = gamma_inf + margin must stay below 1, got " + std::to_string(detail::to_double(p.gamma)));
  return p;
}

inline VasipParams vasip_gamma(double alpha, int d, double margin = 1e-4) {
  return vasip_gamma_t<double>(alpha, d, margin);
}

/// Exact evaluation; alpha and margin are converted from double without rounding.
inline BasicVasipParams<Rational> vasip_gamma_rational(double alpha, int d, double margin = 1e-4) {
  return vasip_gamma_t<Rational>(Rational(alpha), d, Rational(margin));
}

template <class T>
struct BasicCLTGamma {
  T alpha;
  T eps0;
  T M;
  std::array<T, 3> a_branches;
  std::size_t a_branch = 0;
  T a;
  T gamma1;
};

/// Exponent of the scalar CLT: gamma_1 = (2 + a eps0) / (2 + eps0).
template <class T>
BasicCLTGamma<T> clt_gamma1_t(const T& alpha) {
  detail::check_alpha(alpha);
  BasicCLTGamma<T> g;
  g.alpha = alpha;
  g.eps0 = moment_eps0(alpha);
  g.M = memory_exponent(alpha);
  const T& e = g.eps0;
  const T r = e / (T(2) + e);
  g.a_branches = {(e + (T(2) + e) * g.M) / (T(2) + T(2) * e), r / (r + (T(1) - T(2) * alpha) / (T(1) - alpha)),
                  (T(2) + T(2) * e) / (T(4) + T(5) * e)};
  g.a_branch = detail::argmax(g.a_branches);
  g.a = g.a_branches[g.a_branch];
  g.gamma1 = (T(2) + g.a * e) / (T(2) + e);
  return g;
}

inline double clt_gamma1(double alpha) { return clt_gamma1_t<double>(alpha).gamma1; }

struct ConstraintResult {
  std::string name;
  std::string expression;
  double slack = 0.0;  // > 0 when the inequality holds
  bool holds = false;
  bool boundary = false;
};

struct ChainReport {
  double v = 0.0;
  std::array<double, 5> v_branches{};
  std::vector<ConstraintResult> constraints;   // the seven conditions of the proof
  std::vector<ConstraintResult> intermediate;  // the gamma lower bounds they reduce to
  bool all_hold = false;
};

/// Re-evaluates every inequality of the parameter chain at (gamma, kappa, a,
/// c, eps0) with eps = eps0. Slacks within 1e-12 of zero are boundary cases.
template <class T>
ChainReport check_constraint_chain(const BasicVasipParams<T>& p) {
  using detail::tmax;
  using detail::tmin;
  const T &g = p.gamma, &k = p.kappa, &a = p.a, &c = p.c, &e = p.eps0, &M = p.M, &al = p.alpha;
  const T d = T(p.d);
  const T g1 = g * (T(1) + c);
  const std::array<T, 5> vb = {g1 / T(2) - k - c * (T(1) - a),
                               g1 - T(2) * k - c * (T(1) - a) - c * a * al / (T(1) - al),
                               T(2) * g1 - c * (T(1) - a) - T(4) * k - T(2) * c * a,
                               g1 * (T(2) + e) / T(2) - k * (T(2) + e) - c * (T(1) - a) - c * a * (T(2) + e) / T(2),
                               g1 - T(2) * k - c * (T(1) - a) - c * M};
  T v = vb[0];
  for (const auto& x : vb) v = tmin<T>(v, x);
  const T rate = tmin<T>(k, v / T(2) - d * k);

  ChainReport r;
  r.v = detail::to_double(v);
  for (std::size_t i = 0; i < 5; ++i) r.v_branches[i] = detail::to_double(vb[i]);
  auto add = [](std::vector<ConstraintResult>& out, std::string name, std::string expr, const T& lhs, const T& rhs) {
    const T diff = lhs - rhs;
    const double scale = std::max({1.0, std::abs(detail::to_double(lhs)), std::abs(detail::to_double(rhs))});
    ConstraintResult cr{std::move(name), std::move(expr), detail::to_double(diff), false, false};
    cr.boundary = std::abs(cr.slack) <= 1e-12 * scale;
    cr.holds = diff > 0 && !cr.boundary;
    out.push_back(std::move(cr));
  };
  auto& C = r.constraints;
  add(C, "alpha_series", "min(kappa, v/2 - d kappa) > 1", rate, T(1));
  add(C, "coupling_error", "gamma (c+1)/2 > 1 + (c+1)/2 - min(kappa, v/2 - d kappa)", g1 / T(2),
      T(1) + (c + T(1)) / T(2) - rate);
  add(C, "gaussian_tail", "c - gamma (c+1) < 0", g1, c);
  add(C, "neighbor_growth", "1 + (c+1)(M - gamma) < 0", T(0), T(1) + (c + T(1)) * (M - g));
  add(C, "variance_cross", "(1 + (c+1) M) / (gamma (c+1)) < 1", T(1), (T(1) + (c + T(1)) * M) / g1);
  add(C, "variance_gap", "c / (gamma (c+1)) < 1", T(1), c / g1);
  add(C, "maximal_moment", "gamma (c+1)(2+eps)/2 - c (1 + eps/2) > 1", g1 * (T(2) + e) / T(2) - c * (T(1) + e / T(2)),
      T(1));

  auto& I = r.intermediate;
  const T c1 = c + T(1);
  add(I, "v_branch_1", "gamma > (4d+6) kappa/(c+1) + 2c(1-a)/(c+1)", g,
      (T(4) * d + T(6)) * k / c1 + T(2) * c * (T(1) - a) / c1);
  add(I, "v_branch_2", "gamma > (2d+4) kappa/(c+1) + c a alpha/((c+1)(1-alpha)) + c(1-a)/(c+1)", g,
      (T(2) * d + T(4)) * k / c1 + c / c1 * a * al / (T(1) - al) + c / c1 * (T(1) - a));
  add(I, "v_branch_3", "gamma > (d+3) kappa/(c+1) + c(a+1)/(2(c+1))", g,
      (d + T(3)) * k / c1 + c * (a + T(1)) / (T(2) * c1));
  add(I, "v_branch_4", "gamma > 2(2d+4+eps0) kappa/((c+1)(2+eps0)) + (2c + c a eps0)/((c+1)(2+eps0))", g,
      T(2) * (T(2) * d + T(4) + e) / (c1 * (T(2) + e)) * k + (T(2) * c + c * a * e) / (c1 * (T(2) + e)));
  add(I, "v_branch_5", "gamma > (2d+4) kappa/(c+1) + c(1-a)/(c+1) + c M/(c+1)", g,
      (T(2) * d + T(4)) / c1 * k + c * (T(1) - a) / c1 + c / c1 * M);
  add(I, "kappa_rate", "gamma > 1 - 2(kappa-1)/(c+1)", g, T(1) - T(2) / c1 * (k - T(1)));
  add(I, "memory", "gamma > 1/(c+1) + M", g, T(1) / c1 + M);
  add(I, "moment", "gamma > c/(c+1) + 2/((c+1)(2+eps0))", g, c / c1 + T(2) / (c1 * (T(2) + e)));

  r.all_hold = std::all_of(C.begin(), C.end(), [](const auto& x) { return x.holds; }) &&
               std::all_of(I.begin(), I.end(), [](const auto& x) { return x.holds; });
  return r;
}

namespace detail {

inline nlohmann::json num(double x) { return x; }
inline nlohmann::json num(const Rational& x) { return x.str(); }

inline nlohmann::json constraints_json(const std::vector<ConstraintResult>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : v)
    out.push_back({{"name", c.name}, {"expression", c.expression}, {"slack", c.slack}, {"holds", c.holds},
                   {"boundary", c.boundary}});
  return out;
}

}  // namespace detail

template <class T>
nlohmann::json to_json(const BasicVasipParams<T>& p) {
  using detail::num;
  static const char* a_names[] = {"moment_conditional", "moment_doubling", "memory"};
  static const char* c_names[] = {"block_growth", "memory"};
  nlohmann::json a_br = nlohmann::json::array(), c_br = nlohmann::json::array();
  for (std::size_t i = 0; i < 3; ++i) a_br.push_back({{"branch", a_names[i]}, {"value", num(p.a_branches[i])}});
  for (std::size_t i = 0; i < 2; ++i) c_br.push_back({{"branch", c_names[i]}, {"value", num(p.c_branches[i])}});
  return {{"alpha", num(p.alpha)},
          {"d", p.d},
          {"eps0", num(p.eps0)},
          {"M", num(p.M)},
          {"a", {{"value", num(p.a)}, {"attained_by", a_names[p.a_branch]}, {"branches", a_br}}},
          {"c", {{"value", num(p.c)}, {"attained_by", c_names[p.c_branch]}, {"branches", c_br}}},
          {"kappa", num(p.kappa)},
          {"gamma_inf", num(p.gamma_inf)},
          {"margin", num(p.margin)},
          {"gamma", num(p.gamma)}};
}

inline nlohmann::json to_json(const ChainReport& r) {
  return {{"v", r.v},
          {"v_branches", r.v_branches},
          {"constraints", detail::constraints_json(r.constraints)},
          {"intermediate", detail::constraints_json(r.intermediate)},
          {"all_hold", r.all_hold}};
}

template <class T>
nlohmann::json to_json(const BasicCLTGamma<T>& g) {
  using detail::num;
  nlohmann::json br = nlohmann::json::array();
  for (const auto& x : g.a_branches) br.push_back(num(x));
  return {{"alpha", num(g.alpha)}, {"eps0", num(g.eps0)},         {"M", num(g.M)},
          {"a", num(g.a)},         {"a_branch", g.a_branch},       {"a_branches", br},
          {"gamma1", num(g.gamma1)}};
}

}  // namespace vasiplab
