#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "centering.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "json.hpp"
#include "observable.hpp"
#include "orbit.hpp"
#include "schedule.hpp"
#include "ulam.hpp"

namespace vasiplab {

enum class DecayKind { A1, A2, A3, A4, A5, A6 };

inline std::string to_string(DecayKind k) {
  static const char* names[] = {"A1", "A2", "A3", "A4", "A5", "A6"};
  return names[static_cast<int>(k)];
}

inline DecayKind parse_decay_kind(const std::string& s) {
  for (int k = 0; k < 6; ++k)
    if (to_string(static_cast<DecayKind>(k)) == s) return static_cast<DecayKind>(k);
  throw ValidationError("unknown decay kind \"" + s + "\"");
}

struct NRange {
  std::int64_t min = 1;
  std::int64_t max = 200;
};

struct DecayOptions {
  double slack = 1.0;
  std::optional<double> alpha;      // default: largest beta of the schedule
  std::optional<NRange> fit_range;  // default: the sampled range
  double floor = 1e-14;
  unsigned workers = 0;
};

struct DecayReport {
  DecayKind kind = DecayKind::A4;
  double alpha = 0.0;
  Eigen::Index n_bins = 0;
  std::vector<std::pair<double, double>> points;        // (n, L1 norm of the integrand)
  std::vector<std::pair<double, double>> correlations;  // (n, correlation), first-order stationary kind only
  double fitted_slope = 0.0;
  double target_slope = 0.0;
  NRange fit_range;
  double slack = 1.0;
  bool pass = false;
  std::vector<std::pair<double, double>> excluded;
};

namespace detail {

/// Per-bin Euclidean (Frobenius) norm of a block of grid functions, integrated.
inline double block_l1(const Eigen::MatrixXd& g) { return g.rowwise().norm().mean(); }

/// Column (a * d + b) holds u_a * v_b per bin.
inline Eigen::MatrixXd outer_columns(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  Eigen::MatrixXd out(u.rows(), u.cols() * v.cols());
  for (Eigen::Index a = 0; a < u.cols(); ++a)
    for (Eigen::Index b = 0; b < v.cols(); ++b) out.col(a * v.cols() + b) = u.col(a).cwiseProduct(v.col(b));
  return out;
}

inline double default_alpha(const MapSchedule& s) {
  const double b = s.max_beta();
  return b > 0.0 ? b : s.alpha_max();
}

}  // namespace detail

/// L1 norms of the selected decay-of-correlation integrand on an Ulam grid.
/// Non-stationary kinds push P^i 1; stationary kinds use the Ulam invariant
/// density as the reference measure.
inline DecayReport check_decay(const MapSchedule& s, const Observable& phi, DecayKind kind, std::int64_t i,
                               std::int64_t j, NRange range, Eigen::Index n_bins, const DecayOptions& opt = {}) {
  if (i < 0 || j < 0) throw ValidationError("decay indices must be non-negative");
  if (range.min < 0 || range.max < range.min) throw ValidationError("invalid n range");
  const bool stationary_kind = kind == DecayKind::A4 || kind == DecayKind::A5 || kind == DecayKind::A6;
  if (stationary_kind && !s.is_stationary())
    throw ValidationError("stationary decay kinds need a stationary schedule");

  OperatorCache cache(s.alpha_max(), opt.workers);
  const double N = static_cast<double>(n_bins);
  const Eigen::MatrixXd grid = sample_on_grid(phi, n_bins);

  DecayReport rep;
  rep.kind = kind;
  rep.alpha = opt.alpha.value_or(detail::default_alpha(s));
  rep.n_bins = n_bins;
  rep.target_slope = -(1.0 / rep.alpha - 1.0);
  rep.slack = opt.slack;
  rep.fit_range = opt.fit_range.value_or(range);

  // Integrand g and the time index after which pushes start.
  Eigen::MatrixXd g;
  std::int64_t push_from = 0;
  Eigen::MatrixXd phi_ref;  // centered phi used for correlations
  DensityGrid h_ref;

  auto lebesgue_push = [&](std::int64_t t) {
    DensityGrid h = DensityGrid::Ones(n_bins);
    for (std::int64_t k = 1; k <= t; ++k) h = cache.get(s.beta(k), n_bins)->apply(h);
    return h;
  };
  auto center = [&](const DensityGrid& h) {
    const Eigen::RowVectorXd mean = (grid.transpose() * h).transpose() / N;
    return Eigen::MatrixXd(grid.rowwise() - mean);
  };

  if (stationary_kind) {
    const auto op = cache.get(s.beta(1), n_bins);
    h_ref = invariant_density(*op);
    phi_ref = center(h_ref);
    const Eigen::MatrixXd first = phi_ref.array().colwise() * h_ref.array();
    if (kind == DecayKind::A4) {
      g = first;
    } else if (kind == DecayKind::A5) {
      Eigen::MatrixXd q = detail::outer_columns(phi_ref, phi_ref);
      const Eigen::RowVectorXd m = (q.transpose() * h_ref).transpose() / N;
      g = (q.rowwise() - m).array().colwise() * h_ref.array();
    } else {
      Eigen::MatrixXd f = first;
      for (std::int64_t k = 0; k < j; ++k) f = op->apply(f);
      Eigen::MatrixXd q = detail::outer_columns(f, phi_ref);
      const Eigen::RowVectorXd m = q.colwise().mean();
      g = q - h_ref * m;
    }
    push_from = 0;
  } else {
    const DensityGrid hi = lebesgue_push(i);
    const Eigen::MatrixXd phi_i = center(hi);
    if (kind == DecayKind::A1) {
      g = phi_i.array().colwise() * hi.array();
      push_from = i;
    } else if (kind == DecayKind::A2) {
      Eigen::MatrixXd q = detail::outer_columns(phi_i, phi_i);
      const Eigen::RowVectorXd m = (q.transpose() * hi).transpose() / N;
      g = (q.rowwise() - m).array().colwise() * hi.array();
      push_from = i;
    } else {
      Eigen::MatrixXd f = phi_i.array().colwise() * hi.array();
      DensityGrid hij = hi;
      for (std::int64_t k = i + 1; k <= i + j; ++k) {
        const auto op = cache.get(s.beta(k), n_bins);
        f = op->apply(f);
        hij = op->apply(hij);
      }
      const Eigen::MatrixXd phi_ij = center(hij);
      Eigen::MatrixXd q = detail::outer_columns(f, phi_ij);
      const Eigen::RowVectorXd m = q.colwise().mean();
      g = q - hij * m;
      push_from = i + j;
    }
  }

  auto record = [&](std::int64_t n) {
    if (n < range.min) return;
    rep.points.emplace_back(static_cast<double>(n), detail::block_l1(g));
    if (kind == DecayKind::A4)
      rep.correlations.emplace_back(static_cast<double>(n), (g.array() * phi_ref.array()).sum() / N);
  };
  record(0);
  for (std::int64_t n = 1; n <= range.max; ++n) {
    g = cache.get(s.beta(push_from + n), n_bins)->apply(g);
    record(n);
  }

  std::vector<std::pair<double, double>> in_range;
  for (const auto& p : rep.points)
    if (p.first >= static_cast<double>(rep.fit_range.min) && p.first <= static_cast<double>(rep.fit_range.max))
      in_range.push_back(p);
  std::size_t usable = 0;
  for (const auto& p : in_range) usable += p.second > opt.floor;
  if (usable < 2) {
    // Nothing above the noise floor: the integrand has already vanished.
    for (const auto& p : in_range)
      if (!(p.second > opt.floor)) rep.excluded.push_back(p);
    rep.fitted_slope = -std::numeric_limits<double>::infinity();
    rep.pass = true;
    return rep;
  }
  const auto fit = fit_loglog(in_range, static_cast<double>(rep.fit_range.min),
                              static_cast<double>(rep.fit_range.max), opt.floor);
  rep.excluded = fit.excluded;
  rep.fitted_slope = fit.line.slope;
  rep.pass = rep.fitted_slope <= rep.target_slope + rep.slack;
  return rep;
}

inline nlohmann::json to_json(const DecayReport& r) {
  nlohmann::json j;
  j["kind"] = to_string(r.kind);
  j["alpha"] = r.alpha;
  j["n_bins"] = r.n_bins;
  j["points"] = nlohmann::json::array();
  for (const auto& [n, v] : r.points) j["points"].push_back({n, v});
  if (!r.correlations.empty()) {
    j["correlations"] = nlohmann::json::array();
    for (const auto& [n, v] : r.correlations) j["correlations"].push_back({n, v});
  }
  j["fitted_slope"] = std::isfinite(r.fitted_slope) ? nlohmann::json(r.fitted_slope) : nlohmann::json(nullptr);
  j["target_slope"] = r.target_slope;
  j["slack"] = r.slack;
  j["fit_range"] = {r.fit_range.min, r.fit_range.max};
  j["excluded"] = nlohmann::json::array();
  for (const auto& [n, v] : r.excluded) j["excluded"].push_back({n, v});
  j["pass"] = r.pass;
  return j;
}

/// E(f | T^-n B) = g o T^n with g = P^n f / P^n 1; `l1` is E|E_n f| = int |P^n f|.
struct ConditionalExpectation {
  DensityGrid g;
  DensityGrid pushed;  // P^n f
  double l1 = 0.0;
};

inline ConditionalExpectation conditional_expectation(const MapSchedule& s, const DensityGrid& f, std::int64_t n,
                                                      OperatorCache& cache) {
  if (n < 0) throw ValidationError("n must be non-negative");
  const Eigen::Index N = f.size();
  DensityGrid pf = f;
  DensityGrid p1 = DensityGrid::Ones(N);
  for (std::int64_t k = 1; k <= n; ++k) {
    const auto op = cache.get(s.beta(k), N);
    pf = op->apply(pf);
    p1 = op->apply(p1);
  }
  ConditionalExpectation ce;
  ce.pushed = pf;
  ce.g = DensityGrid::Zero(N);
  for (Eigen::Index b = 0; b < N; ++b)
    if (p1[b] > 1e-300) ce.g[b] = pf[b] / p1[b];
  ce.l1 = l1_norm(pf);
  return ce;
}

inline ConditionalExpectation conditional_expectation(const MapSchedule& s, const DensityGrid& f, std::int64_t n) {
  OperatorCache cache(s.alpha_max());
  return conditional_expectation(s, f, n, cache);
}

struct CFDeviation {
  double value = 0.0;
  double standard_error = 0.0;
  bool resolved = true;  // false when the standard error exceeds the estimate
  double b = 0.0;        // normalizer: spectral norm of the sample second moment
  std::size_t samples = 0;
};

/// Deviation E | E(exp(i u.X / sqrt b) | label) - exp(-u.(E XX^T / b) u / 2) |
/// from samples X (one row each) and conditioning labels in [0, n_labels).
inline CFDeviation cf_deviation_from_samples(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_labels,
                                             const Eigen::VectorXd& u) {
  const Eigen::Index m = X.rows();
  if (static_cast<std::size_t>(m) != labels.size()) throw DimensionMismatch("labels must match sample count");
  if (u.size() != X.cols()) throw DimensionMismatch("u must have the observable's dimension");
  if (m < 2) throw NumericalError("characteristic-function estimate needs at least two samples");
  CFDeviation out;
  out.samples = static_cast<std::size_t>(m);
  const Eigen::MatrixXd second = X.transpose() * X / static_cast<double>(m);
  out.b = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(second, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (u.squaredNorm() == 0.0) return out;
  if (!(out.b > 0.0)) throw NumericalError("block sums have zero second moment");
  const double target = std::exp(-0.5 * u.dot(second * u) / out.b);
  const Eigen::VectorXd phase = X * u / std::sqrt(out.b);
  std::vector<double> cs(static_cast<std::size_t>(n_labels), 0.0), sn(cs), c2(cs), s2(cs), cnt(cs);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto l = static_cast<std::size_t>(labels[static_cast<std::size_t>(r)]);
    const double c = std::cos(phase[r]), s = std::sin(phase[r]);
    cs[l] += c;
    sn[l] += s;
    c2[l] += c * c;
    s2[l] += s * s;
    cnt[l] += 1.0;
  }
  double value = 0.0, var = 0.0;
  for (std::size_t l = 0; l < cs.size(); ++l) {
    if (cnt[l] < 1.0) continue;
    const double p = cnt[l] / static_cast<double>(m);
    const double mc = cs[l] / cnt[l], ms = sn[l] / cnt[l];
    value += p * std::hypot(mc - target, ms);
    if (cnt[l] > 1.0) {
      const double vc = std::max(c2[l] / cnt[l] - mc * mc, 0.0);
      const double vs = std::max(s2[l] / cnt[l] - ms * ms, 0.0);
      var += p * p * (vc + vs) / (cnt[l] - 1.0);
    }
  }
  out.value = value;
  out.standard_error = std::sqrt(var);
  out.resolved = !(out.standard_error > out.value);
  return out;
}

struct CFOptions {
  std::uint64_t ensemble = 10000;
  std::uint64_t seed = 0;
  int condition_bins = 16;
  unsigned workers = 0;
};

/// Block sum X = sum_{k=start}^{start+len-1} phi_k(x_k), Ulam-centered,
/// conditioned on the bin of x_{start+len}.
inline CFDeviation estimate_cf_deviation(const MapSchedule& s, const Observable& phi, std::int64_t start,
                                         std::int64_t len, const Eigen::VectorXd& u, Eigen::Index n_bins,
                                         const CFOptions& opt = {}) {
  if (start < 1 || len < 1) throw ValidationError("block must start at 1 or later and be non-empty");
  const std::int64_t end = start + len - 1;
  const Eigen::MatrixXd means = ulam_means(phi, s, end + 1, n_bins);
  EnsembleOptions eo;
  eo.workers = opt.workers;
  const auto ens = sample_ensemble(s, opt.ensemble, end + 1, opt.seed, eo);
  const int d = phi.dim();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(opt.ensemble), d);
  std::vector<int> labels(opt.ensemble, 0);
  for_each_chunk(opt.ensemble, 256, resolve_workers(opt.workers), [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (std::size_t i = b; i < e; ++i) {
      ens.stream_orbit(i, [&](std::int64_t k, double x) {
        if (k >= start && k <= end) {
          phi.eval(x, v.data());
          for (int c = 0; c < d; ++c) X(static_cast<Eigen::Index>(i), c) += v[static_cast<std::size_t>(c)] - means(k, c);
        } else if (k == end + 1) {
          labels[i] = std::min(opt.condition_bins - 1, static_cast<int>(x * opt.condition_bins));
        }
      });
    }
  });
  return cf_deviation_from_samples(X, labels, opt.condition_bins, u);
}

}  // namespace vasiplab
