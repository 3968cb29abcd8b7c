#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "json.hpp"
#include "orbit.hpp"
#include "rng.hpp"

namespace vasiplab {

struct LimitReport {
  std::string kind;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool degenerate = false;
  nlohmann::json diagnostics = nlohmann::json::object();
};

inline nlohmann::json to_json(const LimitReport& r) {
  return {{"kind", r.kind},
          {"statistic", r.statistic},
          {"threshold", r.threshold},
          {"pass", r.pass},
          {"degenerate", r.degenerate},
          {"diagnostics", r.diagnostics}};
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided Kolmogorov-Smirnov distance of the sample to N(0, 1).
inline double ks_normal(std::vector<double> z) {
  if (z.empty()) throw ValidationError("KS statistic needs at least one sample");
  std::sort(z.begin(), z.end());
  const double m = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf(z[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / m - f, f - static_cast<double>(i) / m});
  }
  return d;
}

/// Asymptotic p-value of the Kolmogorov distribution with the Stephens
/// finite-sample correction.
inline double ks_pvalue(double d, std::size_t m) {
  const double sm = std::sqrt(static_cast<double>(m));
  const double lam = (sm + 0.12 + 0.11 / sm) * d;
  if (lam < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lam * lam);
    p += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Critical value c(level) / sqrt(m) of the two-sided KS test.
inline double ks_band(std::size_t m, double level = 0.05) {
  return std::sqrt(-0.5 * std::log(level / 2.0)) / std::sqrt(static_cast<double>(m));
}

struct CLTOptions {
  double degenerate_ratio = 1e-3;  // lambda_min / n below this is degenerate
  std::optional<double> threshold;  // default: the KS band at level 0.05
  int projections = 16;
  std::uint64_t seed = 0;
};

/// KS test of S_n / sigma_n against the standard normal. For d > 1 the sums
/// are whitened by sigma_n and tested along random unit directions, with
/// Mardia's skewness and kurtosis reported alongside.
inline LimitReport self_norming_clt(const EnsembleSums& sums, const CovarianceTrace& trace, std::int64_t n,
                                    const CLTOptions& opt = {}) {
  LimitReport r;
  r.kind = "clt";
  const auto ci = std::find(sums.checkpoints.begin(), sums.checkpoints.end(), n);
  if (ci == sums.checkpoints.end()) throw ValidationError("n = " + std::to_string(n) + " is not a checkpoint");
  const Eigen::MatrixXd& s = sums.sums[static_cast<std::size_t>(ci - sums.checkpoints.begin())];
  const auto ti = trace.index_of(n);
  const Eigen::MatrixXd& sigma = trace.entries[ti];
  const std::size_t m = static_cast<std::size_t>(s.rows());
  const int d = static_cast<int>(s.cols());
  r.diagnostics["n"] = n;
  r.diagnostics["orbits"] = m;
  r.diagnostics["lambda_min"] = trace.lambda_min[ti];
  if (!(trace.lambda_min[ti] / static_cast<double>(n) > opt.degenerate_ratio)) {
    r.degenerate = true;
    r.statistic = std::nan("");
    return r;
  }
  if (d == 1) {
    const double sd = std::sqrt(sigma(0, 0));
    std::vector<double> z(m);
    for (std::size_t i = 0; i < m; ++i) z[i] = s(static_cast<Eigen::Index>(i), 0) / sd;
    r.statistic = ks_normal(z);
    r.threshold = opt.threshold.value_or(ks_band(m));
    r.diagnostics["p_value"] = ks_pvalue(r.statistic, m);
  } else {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    const Eigen::MatrixXd inv_sqrt =
        es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd w = s * inv_sqrt;
    CounterStream rng(opt.seed, derive_seed(opt.seed, 0xC17));
    std::vector<double> ks;
    for (int p = 0; p < opt.projections; ++p) {
      Eigen::VectorXd u(d);
      for (int c = 0; c < d; ++c) u[c] = rng.normal();
      u.normalize();
      const Eigen::VectorXd proj = w * u;
      ks.push_back(ks_normal(std::vector<double>(proj.data(), proj.data() + proj.size())));
    }
    r.statistic = *std::max_element(ks.begin(), ks.end());
    r.threshold = opt.threshold.value_or(ks_band(m, 0.05 / opt.projections));
    r.diagnostics["projection_ks"] = ks;
    // Mardia: b1 -> 0 and b2 -> d(d+2) under normality.
    const double mm = static_cast<double>(m);
    const Eigen::MatrixXd g = w * w.transpose();
    const double b1 = g.array().cube().sum() / (mm * mm);
    const double b2 = g.diagonal().array().square().sum() / mm;
    r.diagnostics["mardia_skewness"] = b1;
    r.diagnostics["mardia_kurtosis"] = b2;
    r.diagnostics["mardia_kurtosis_z"] = (b2 - d * (d + 2.0)) / std::sqrt(8.0 * d * (d + 2.0) / mm);
  }
  r.pass = r.statistic < r.threshold;
  return r;
}

struct LILOptions {
  double low = 0.5;
  double high = 1.5;
  double degenerate_ratio = 1e-3;
};

/// Running extremes of S_n / sqrt(2 sigma_n^2 log log sigma_n^2) over the
/// checkpoints in [sqrt(N), N], summarized by their medians across orbits.
inline LimitReport lil_band(const EnsembleSums& sums, const CovarianceTrace& trace, const LILOptions& opt = {}) {
  if (sums.dim != 1) throw DimensionMismatch("lil_band needs a scalar observable");
  if (sums.checkpoints.empty()) throw ValidationError("lil_band needs checkpoints");
  LimitReport r;
  r.kind = "lil";
  r.threshold = opt.high;
  const std::int64_t N = sums.checkpoints.back();
  const double lam = trace.lambda_min[trace.index_of(N)];
  if (!(lam / static_cast<double>(N) > opt.degenerate_ratio)) {
    r.degenerate = true;
    r.statistic = std::nan("");
    return r;
  }
  const double lo_n = std::sqrt(static_cast<double>(N));
  std::vector<std::size_t> use;
  for (std::size_t c = 0; c < sums.checkpoints.size(); ++c) {
    const auto n = sums.checkpoints[c];
    if (static_cast<double>(n) < lo_n) continue;
    if (trace.entries[trace.index_of(n)](0, 0) > std::exp(1.0)) use.push_back(c);
  }
  if (use.empty()) throw ValidationError("sigma_n^2 never exceeds e; the horizon is too short for log log");
  const std::size_t m = sums.orbits();
  std::vector<double> hi(m, -INFINITY), lo(m, INFINITY);
  for (auto c : use) {
    const double v = trace.entries[trace.index_of(sums.checkpoints[c])](0, 0);
    const double scale = std::sqrt(2.0 * v * std::log(std::log(v)));
    for (std::size_t i = 0; i < m; ++i) {
      const double ratio = sums.sums[c](static_cast<Eigen::Index>(i), 0) / scale;
      hi[i] = std::max(hi[i], ratio);
      lo[i] = std::min(lo[i], ratio);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
  };
  const double upper = median(hi);
  const double lower = -median(lo);
  r.statistic = upper;
  r.diagnostics["median_upper"] = upper;
  r.diagnostics["median_lower"] = lower;
  r.diagnostics["checkpoints_used"] = use.size();
  r.diagnostics["band"] = {opt.low, opt.high};
  r.pass = upper >= opt.low && upper <= opt.high && lower >= opt.low && lower <= opt.high;
  return r;
}

struct DegenerateOptions {
  double eps = 0.1;
  std::int64_t n_min = 10;
};

/// Growth of max_i |S_n| / n^(1/2 - eps) across orbits; passes when the
/// fitted log-log slope is negative. Uses the running maximum when tracked.
inline LimitReport degenerate_check(const EnsembleSums& sums, const DegenerateOptions& opt = {}) {
  if (!(opt.eps >= 0.0 && opt.eps < 0.5)) throw ValidationError("eps must lie in [0, 1/2)");
  LimitReport r;
  r.kind = "degenerate";
  std::vector<std::pair<double, double>> pts;
  double overall = 0.0;
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t c = 0; c < sums.checkpoints.size(); ++c) {
    const double n = static_cast<double>(sums.checkpoints[c]);
    double mx = 0.0;
    if (!sums.max_sq.empty())
      mx = std::sqrt(sums.max_sq[c].maxCoeff());
    else
      mx = sums.sums[c].rowwise().norm().maxCoeff();
    overall = std::max(overall, mx);
    const double ratio = mx / std::pow(n, 0.5 - opt.eps);
    table.push_back({n, mx, ratio});
    if (sums.checkpoints[c] >= opt.n_min) pts.emplace_back(n, ratio);
  }
  r.diagnostics["table"] = table;
  r.diagnostics["max_abs_sum"] = overall;
  r.diagnostics["eps"] = opt.eps;
  r.threshold = 0.0;
  if (pts.size() < 2) throw ValidationError("degenerate_check needs at least two checkpoints at or above n_min");
  if (overall == 0.0) {
    r.statistic = -INFINITY;
    r.pass = true;
    return r;
  }
  const auto fit = fit_loglog(pts, 0.0, INFINITY, 0.0);
  r.statistic = fit.line.slope;
  r.pass = r.statistic < 0.0;
  return r;
}

}  // namespace vasiplab
