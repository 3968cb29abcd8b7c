#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"
#include "driver.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "json.hpp"
#include "observable.hpp"
#include "orbit.hpp"
#include "schedule.hpp"
#include "ulam.hpp"

namespace vasiplab {

/// h_omega on the Ulam grid, built as L^n 1 from the n fibers preceding omega.
struct FiberDensity {
  std::int64_t omega = 0;
  std::int64_t n_iter = 0;
  DensityGrid h;
  std::vector<std::pair<double, double>> increments;  // (n, |L^n 1 - L^2n 1|_1)
  double fitted_exponent = 0.0;
  bool converged = false;
};

struct QuasiDensityOptions {
  double alpha_max = 0.49;
  double tol = 1e-2;  // the last increment must fall below this
  double rho = 1.3;
  unsigned workers = 0;
};

namespace detail {

/// P_{omega-1} o ... o P_{omega-n} f.
inline DensityGrid pull_from_past(const Driver& drv, std::int64_t omega, std::int64_t n, DensityGrid f,
                                  OperatorCache& cache) {
  for (std::int64_t j = omega - n; j < omega; ++j) f = cache.get(drv.beta(j), f.size())->apply(f);
  return f;
}

}  // namespace detail

inline FiberDensity quasi_invariant_density(const Driver& drv, std::int64_t omega, std::int64_t n_iter,
                                            Eigen::Index n_bins, OperatorCache& cache,
                                            const QuasiDensityOptions& opt = {}) {
  if (n_iter < 2) throw ValidationError("n_iter must be at least 2");
  FiberDensity fd;
  fd.omega = omega;
  fd.n_iter = n_iter;
  fd.h = detail::pull_from_past(drv, omega, n_iter, DensityGrid::Ones(n_bins), cache);
  fd.h /= integral(fd.h);
  for (auto n : geometric_checkpoints(1, n_iter / 2, opt.rho)) {
    const DensityGrid a = detail::pull_from_past(drv, omega, n, DensityGrid::Ones(n_bins), cache);
    const DensityGrid b = detail::pull_from_past(drv, omega, 2 * n, DensityGrid::Ones(n_bins), cache);
    fd.increments.emplace_back(static_cast<double>(n), l1_norm(a - b));
  }
  std::size_t usable = 0;
  for (const auto& p : fd.increments) usable += p.second > 1e-14;
  fd.fitted_exponent = usable >= 2 ? fit_loglog(fd.increments, 0.0, INFINITY, 1e-14).line.slope : -INFINITY;
  fd.converged = fd.increments.back().second <= opt.tol;
  return fd;
}

inline FiberDensity quasi_invariant_density(const Driver& drv, std::int64_t omega, std::int64_t n_iter,
                                            Eigen::Index n_bins, const QuasiDensityOptions& opt = {}) {
  OperatorCache cache(opt.alpha_max, opt.workers);
  return quasi_invariant_density(drv, omega, n_iter, n_bins, cache, opt);
}

/// |P_omega h_omega - h_{sigma omega}|_1 with h_{sigma omega} built from the
/// same number of past fibers.
inline double check_equivariance(const Driver& drv, const FiberDensity& h, Eigen::Index n_bins, OperatorCache& cache) {
  if (h.h.size() != n_bins) throw DimensionMismatch("fiber density grid differs from n_bins");
  const DensityGrid next =
      detail::pull_from_past(drv, h.omega + 1, h.n_iter, DensityGrid::Ones(n_bins), cache);
  const DensityGrid pushed = cache.get(drv.beta(h.omega), n_bins)->apply(h.h);
  return l1_norm(pushed - next / integral(next));
}

inline double check_equivariance(const Driver& drv, const FiberDensity& h, Eigen::Index n_bins,
                                 double alpha_max = 0.49) {
  OperatorCache cache(alpha_max);
  return check_equivariance(drv, h, n_bins, cache);
}

/// Inverse CDF of a piecewise-constant density on [0, 1].
class GridSampler {
 public:
  explicit GridSampler(const DensityGrid& h) : cdf_(static_cast<std::size_t>(h.size())) {
    if (h.size() == 0 || h.minCoeff() < 0.0) throw ValidationError("density must be non-negative and non-empty");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) cdf_[static_cast<std::size_t>(i)] = acc += h[i];
    if (!(acc > 0.0)) throw ValidationError("density has zero mass");
    for (double& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  double operator()(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto b = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), cdf_.size() - 1));
    const double lo = b == 0 ? 0.0 : cdf_[b - 1];
    const double w = cdf_[b] - lo;
    const double frac = w > 0.0 ? std::clamp((u - lo) / w, 0.0, 1.0) : 0.5;
    return (static_cast<double>(b) + frac) / static_cast<double>(cdf_.size());
  }

  InitialSampler sampler() const {
    auto self = std::make_shared<GridSampler>(*this);
    return [self](std::uint64_t, CounterStream& s) { return (*self)(s.uniform01()); };
  }

 private:
  std::vector<double> cdf_;
};

/// Row k: integral of phi against P^k h over the schedule, k = 0..n.
inline Eigen::MatrixXd pushed_means(const Observable& phi, const MapSchedule& s, const DensityGrid& h0,
                                    std::int64_t n, OperatorCache& cache) {
  const Eigen::Index N = h0.size();
  const Eigen::MatrixXd grid = phi.sample(bin_centers(N));
  Eigen::MatrixXd means(n + 1, phi.dim());
  DensityGrid h = h0 / integral(h0);
  for (std::int64_t k = 0; k <= n; ++k) {
    if (k > 0) h = cache.get(s.beta(k), N)->apply(h);
    means.row(k) = (grid.transpose() * h).transpose() / static_cast<double>(N);
  }
  return means;
}

struct QuenchedOptions {
  Eigen::Index n_bins = 8192;
  std::int64_t n_iter = 200;
  std::uint64_t ensemble = 10000;
  std::uint64_t seed = 0;
  double alpha_max = 0.49;
  double rho = 1.3;
  std::int64_t n_min = 10;
  unsigned workers = 0;
};

struct FiberStats {
  std::int64_t omega = 0;
  FiberDensity density;
  EnsembleSums sums;
  CovarianceTrace trace;
  Eigen::MatrixXd sigma2_over_n;
  Eigen::MatrixXd standard_error;
  int dim_w1 = 0;
};

struct QuenchedReport {
  std::vector<FiberStats> fibers;
  double max_z = 0.0;  // largest pairwise |difference| / combined standard error
  bool agree = false;
  bool split_dims_agree = false;
};

inline std::uint64_t fiber_seed(std::uint64_t seed, std::size_t fiber) {
  return derive_seed(seed, 0xF1BE4000ULL + fiber);
}

/// Statistics of one fiber: initial points from h_omega, centering along the
/// fiber's own pushforwards.
inline FiberStats fiber_stats(const Driver& drv, std::int64_t omega, const Observable& phi, std::int64_t n,
                              std::uint64_t seed, const QuenchedOptions& opt, OperatorCache& cache) {
  FiberStats f;
  f.omega = omega;
  QuasiDensityOptions qo;
  qo.alpha_max = opt.alpha_max;
  f.density = quasi_invariant_density(drv, omega, opt.n_iter, opt.n_bins, cache, qo);
  const MapSchedule s = MapSchedule::driven(drv, opt.alpha_max, omega);
  const Eigen::MatrixXd means = pushed_means(phi, s, f.density.h, n, cache);
  EnsembleOptions eo;
  eo.workers = opt.workers;
  eo.initial = GridSampler(f.density.h).sampler();
  const Ensemble ens(s, opt.ensemble, n, seed, eo);
  f.sums = ensemble_sums(ens, phi, means, geometric_checkpoints(opt.n_min, n, opt.rho), SumsOptions{true});
  f.trace = covariance_trace(f.sums);
  f.sigma2_over_n = f.trace.entries.back() / static_cast<double>(n);
  f.standard_error = f.trace.standard_errors.back() / static_cast<double>(n);
  f.dim_w1 = covariance_split(f.sigma2_over_n).dim_w1();
  return f;
}

inline QuenchedReport quenched_stats(const Driver& drv, const std::vector<std::int64_t>& omegas, const Observable& phi,
                                     std::int64_t n, const QuenchedOptions& opt = {}) {
  if (omegas.empty()) throw ValidationError("quenched_stats needs at least one omega");
  OperatorCache cache(opt.alpha_max, opt.workers);
  QuenchedReport r;
  for (std::size_t j = 0; j < omegas.size(); ++j)
    r.fibers.push_back(fiber_stats(drv, omegas[j], phi, n, fiber_seed(opt.seed, j), opt, cache));
  r.split_dims_agree = true;
  for (std::size_t i = 0; i < r.fibers.size(); ++i) {
    if (r.fibers[i].dim_w1 != r.fibers[0].dim_w1) r.split_dims_agree = false;
    for (std::size_t j = i + 1; j < r.fibers.size(); ++j) {
      const auto& a = r.fibers[i];
      const auto& b = r.fibers[j];
      const Eigen::MatrixXd se = (a.standard_error.cwiseAbs2() + b.standard_error.cwiseAbs2()).cwiseSqrt();
      const Eigen::MatrixXd diff = (a.sigma2_over_n - b.sigma2_over_n).cwiseAbs();
      for (Eigen::Index p = 0; p < diff.size(); ++p) {
        const double z = se(p) > 0.0 ? diff(p) / se(p) : (diff(p) > 0.0 ? INFINITY : 0.0);
        r.max_z = std::max(r.max_z, z);
      }
    }
  }
  r.agree = r.max_z <= 3.0;
  return r;
}

inline nlohmann::json to_json(const FiberDensity& f) {
  nlohmann::json inc = nlohmann::json::array();
  for (const auto& [n, v] : f.increments) inc.push_back({n, v});
  return {{"omega", f.omega},
          {"n_iter", f.n_iter},
          {"increments", inc},
          {"fitted_exponent", std::isfinite(f.fitted_exponent) ? nlohmann::json(f.fitted_exponent) : nlohmann::json(nullptr)},
          {"converged", f.converged}};
}

inline nlohmann::json to_json(const QuenchedReport& r) {
  nlohmann::json fibers = nlohmann::json::array();
  for (const auto& f : r.fibers)
    fibers.push_back({{"omega", f.omega},
                      {"density", to_json(f.density)},
                      {"sigma2_over_n", matrix_json(f.sigma2_over_n)},
                      {"standard_error", matrix_json(f.standard_error)},
                      {"lambda_min", f.trace.lambda_min},
                      {"dim_w1", f.dim_w1}});
  return {{"fibers", fibers}, {"max_z", r.max_z}, {"agree", r.agree}, {"split_dims_agree", r.split_dims_agree}};
}

/// Header "omega,bin,x,density".
inline std::string fiber_density_csv(const std::vector<FiberDensity>& fds) {
  std::ostringstream os;
  os.precision(17);
  os << "omega,bin,x,density\n";
  for (const auto& f : fds) {
    const auto N = f.h.size();
    for (Eigen::Index b = 0; b < N; ++b)
      os << f.omega << ',' << b << ',' << (static_cast<double>(b) + 0.5) / static_cast<double>(N) << ',' << f.h[b]
         << '\n';
  }
  return os.str();
}

}  // namespace vasiplab
