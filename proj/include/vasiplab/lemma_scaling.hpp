#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "centering.hpp"
#include "decay.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "json.hpp"
#include "observable.hpp"
#include "orbit.hpp"
#include "schedule.hpp"
#include "ulam.hpp"

namespace vasiplab {

enum class LemmaKind { sublinear, cond_bound, cond_second, higher_moment, cross_block, maximal };

inline std::string to_string(LemmaKind k) {
  static const char* names[] = {"sublinear", "cond_bound", "cond_second", "higher_moment", "cross_block", "maximal"};
  return names[static_cast<int>(k)];
}

inline LemmaKind parse_lemma_kind(const std::string& s) {
  for (int k = 0; k < 6; ++k)
    if (to_string(static_cast<LemmaKind>(k)) == s) return static_cast<LemmaKind>(k);
  throw ValidationError("unknown lemma kind \"" + s + "\"");
}

inline double default_slack(LemmaKind k) {
  switch (k) {
    case LemmaKind::sublinear:
    case LemmaKind::higher_moment:
    case LemmaKind::maximal:
      return 0.2;
    default:
      return 0.3;
  }
}

/// Half of the admissible moment exponent min(1, 2 - 2 alpha / (1 - alpha)).
inline double default_moment_eps(double alpha) { return 0.5 * std::min(1.0, 2.0 - 2.0 * alpha / (1.0 - alpha)); }

inline double lemma_target(LemmaKind k, double alpha, double eps) {
  switch (k) {
    case LemmaKind::sublinear:
      return 1.0;
    case LemmaKind::cond_bound:
      return 0.0;
    case LemmaKind::cond_second:
      return alpha / (1.0 - alpha);
    case LemmaKind::higher_moment:
      return 1.0 + eps;
    case LemmaKind::cross_block:
      return std::max(3.0 - 1.0 / alpha, 0.0);
    case LemmaKind::maximal:
      return 1.0 + eps / 2.0;
  }
  return 0.0;
}

struct LemmaOptions {
  std::optional<double> slack;
  std::optional<double> alpha;  // default: largest beta of the schedule
  std::optional<double> eps;    // default: default_moment_eps(alpha)
  std::int64_t block_start = 1;  // m: the block is [m, m + n - 1]
  std::uint64_t ensemble = 10000;  // maximal only
  std::uint64_t seed = 0;
  double rho = 1.3;
  double floor = 1e-14;
  unsigned workers = 0;
};

struct LemmaReport {
  LemmaKind kind = LemmaKind::sublinear;
  double alpha = 0.0;
  double eps = 0.0;
  std::vector<std::pair<double, double>> points;  // (n, quantity)
  double fitted_exponent = 0.0;
  double target = 0.0;
  double slack = 0.0;
  NRange fit_range;
  bool pass = false;
};

inline nlohmann::json to_json(const LemmaReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [n, v] : r.points) pts.push_back({n, v});
  return {{"kind", to_string(r.kind)},
          {"alpha", r.alpha},
          {"eps", r.eps},
          {"points", pts},
          {"fitted_exponent", r.fitted_exponent},
          {"target", r.target},
          {"slack", r.slack},
          {"fit_range", {r.fit_range.min, r.fit_range.max}},
          {"pass", r.pass}};
}

namespace detail {

inline void finish_lemma(LemmaReport& r, double floor) {
  const auto fit = fit_loglog(r.points, static_cast<double>(r.fit_range.min), static_cast<double>(r.fit_range.max), floor);
  r.fitted_exponent = fit.line.slope;
  r.pass = r.fitted_exponent <= r.target + r.slack;
}

inline LemmaReport lemma_header(LemmaKind kind, double alpha, NRange range, const LemmaOptions& opt) {
  if (range.min < 1 || range.max <= range.min) throw ValidationError("lemma range needs 1 <= min < max");
  LemmaReport r;
  r.kind = kind;
  r.alpha = alpha;
  r.eps = opt.eps.value_or(default_moment_eps(alpha));
  r.target = lemma_target(kind, alpha, r.eps);
  r.slack = opt.slack.value_or(default_slack(kind));
  r.fit_range = range;
  return r;
}

}  // namespace detail

/// Growth exponents of the block-sum quantities behind the dynamical
/// inequalities, computed exactly on the Ulam grid except for the maximal
/// inequality, which runs an ensemble. The block is S = sum_{k=m}^{m+n-1}
/// phi_k o T^k under Lebesgue measure and E_{n+m} conditions on T^{-(n+m)}B.
inline LemmaReport check_lemma_scaling(LemmaKind kind, const MapSchedule& s, const Observable& phi, NRange range,
                                       Eigen::Index n_bins, const LemmaOptions& opt = {}) {
  LemmaReport r = detail::lemma_header(kind, opt.alpha.value_or(detail::default_alpha(s)), range, opt);
  if (opt.block_start < 1) throw ValidationError("block_start must be at least 1");
  const auto checkpoints = geometric_checkpoints(range.min, range.max, opt.rho);
  const std::int64_t m = opt.block_start;
  const int d = phi.dim();
  OperatorCache cache(s.alpha_max(), opt.workers);

  if (kind == LemmaKind::maximal) {
    const std::int64_t horizon = m + range.max - 1;
    const Eigen::MatrixXd means = ulam_means(phi, s, horizon, n_bins, cache);
    EnsembleOptions eo;
    eo.workers = opt.workers;
    const auto ens = sample_ensemble(s, opt.ensemble, horizon, opt.seed, eo);
    const double p = (2.0 + r.eps) / 2.0;
    // Per-checkpoint sums of max_{k<=n} |S_k|^(2+eps), reduced in chunk order.
    const std::size_t chunk = 256;
    std::vector<std::vector<double>> partial(chunk_count(opt.ensemble, chunk), std::vector<double>(checkpoints.size()));
    for_each_chunk(opt.ensemble, chunk, resolve_workers(opt.workers), [&](std::size_t ci, std::size_t b, std::size_t e) {
      Eigen::VectorXd v(d), acc(d);
      for (std::size_t i = b; i < e; ++i) {
        acc.setZero();
        double mx = 0.0;
        std::size_t next = 0;
        ens.stream_orbit(i, [&](std::int64_t k, double x) {
          if (k < m || next >= checkpoints.size()) return;
          phi.eval(x, v.data());
          acc += v - means.row(k).transpose();
          mx = std::max(mx, acc.squaredNorm());
          if (k - m + 1 == checkpoints[next]) partial[ci][next++] += std::pow(mx, p);
        });
      }
    });
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      double total = 0.0;
      for (const auto& part : partial) total += part[c];
      r.points.emplace_back(static_cast<double>(checkpoints[c]), total / static_cast<double>(opt.ensemble));
    }
    detail::finish_lemma(r, opt.floor);
    return r;
  }

  const double N = static_cast<double>(n_bins);
  const Eigen::MatrixXd grid = sample_on_grid(phi, n_bins);
  const std::int64_t horizon = m + (kind == LemmaKind::cross_block ? 2 * range.max : range.max) + 1;
  const Eigen::MatrixXd means = ulam_means(phi, s, horizon, n_bins, cache);
  auto centered = [&](std::int64_t t) { return Eigen::MatrixXd(grid.rowwise() - means.row(t)); };
  auto op_at = [&](std::int64_t t) { return cache.get(s.beta(t), n_bins); };
  auto lebesgue_at = [&](std::int64_t t) {
    DensityGrid h = DensityGrid::Ones(n_bins);
    for (std::int64_t k = 1; k <= t; ++k) h = op_at(k)->apply(h);
    return h;
  };

  if (kind == LemmaKind::cross_block) {
    for (auto n : checkpoints) {
      DensityGrid h = lebesgue_at(m);
      Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n_bins, d);
      for (std::int64_t t = m; t < m + n; ++t) {
        if (t > m) {
          const auto op = op_at(t);
          D = op->apply(D);
          h = op->apply(h);
        }
        D += (centered(t).array().colwise() * h.array()).matrix();
      }
      Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);
      for (std::int64_t t = m + n; t < m + 2 * n; ++t) {
        D = op_at(t)->apply(D);
        cross += D.transpose() * centered(t) / N;
      }
      r.points.emplace_back(static_cast<double>(n), cross.norm());
    }
    detail::finish_lemma(r, opt.floor);
    return r;
  }

  DensityGrid h = lebesgue_at(m);
  // D_t and Q_t carry S and S S^T forward as densities at the current time.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n_bins, d);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n_bins, d * d);
  std::size_t next = 0;
  for (std::int64_t t = m; t < m + range.max && next < checkpoints.size(); ++t) {
    const Eigen::MatrixXd phit = centered(t);
    if (t > m) {
      const auto op = op_at(t);
      D = op->apply(D);
      Q = op->apply(Q);
      h = op->apply(h);
    }
    Q += detail::outer_columns(D, phit) + detail::outer_columns(phit, D);
    Q += (detail::outer_columns(phit, phit).array().colwise() * h.array()).matrix();
    D += (phit.array().colwise() * h.array()).matrix();
    const std::int64_t n = t - m + 1;
    if (n != checkpoints[next]) continue;
    ++next;
    const Eigen::RowVectorXd second = Q.colwise().sum() / N;
    double value = 0.0;
    if (kind == LemmaKind::sublinear) {
      value = second.norm();
    } else {
      const auto op = op_at(t + 1);
      const DensityGrid hn = op->apply(h);
      if (kind == LemmaKind::cond_bound) {
        value = op->apply(D).rowwise().norm().sum() / N;
      } else {
        const Eigen::MatrixXd dev = op->apply(Q) - hn * second;
        if (kind == LemmaKind::cond_second) {
          value = dev.rowwise().norm().sum() / N;
        } else {
          const double p = 1.0 + r.eps;
          const Eigen::VectorXd norms = dev.rowwise().norm();
          for (Eigen::Index b = 0; b < n_bins; ++b)
            if (hn[b] > 0.0) value += std::pow(norms[b] / hn[b], p) * hn[b];
          value /= N;
        }
      }
    }
    r.points.emplace_back(static_cast<double>(n), value);
  }
  detail::finish_lemma(r, opt.floor);
  return r;
}

/// Same quantities from precomputed ensemble sums (sublinear: |E S_n S_n^T|,
/// maximal: E max_k |S_k|^(2+eps)).
inline LemmaReport check_lemma_scaling(LemmaKind kind, const EnsembleSums& sums, double alpha, NRange range,
                                       const LemmaOptions& opt = {}) {
  if (kind != LemmaKind::sublinear && kind != LemmaKind::maximal)
    throw ValidationError("ensemble input supports only the sublinear and maximal kinds");
  if (sums.orbits() < 2) throw ValidationError("insufficient ensemble for stable moments");
  LemmaReport r = detail::lemma_header(kind, alpha, range, opt);
  for (std::size_t c = 0; c < sums.checkpoints.size(); ++c) {
    const double n = static_cast<double>(sums.checkpoints[c]);
    if (kind == LemmaKind::sublinear) {
      const auto& s = sums.sums[c];
      r.points.emplace_back(n, (s.transpose() * s / static_cast<double>(s.rows())).norm());
    } else {
      if (sums.max_sq.empty()) throw ValidationError("maximal kind needs running maxima");
      r.points.emplace_back(n, sums.max_sq[c].array().pow((2.0 + r.eps) / 2.0).mean());
    }
  }
  detail::finish_lemma(r, opt.floor);
  return r;
}

}  // namespace vasiplab
