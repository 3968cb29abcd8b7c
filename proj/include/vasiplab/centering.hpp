#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "observable.hpp"
#include "orbit.hpp"
#include "schedule.hpp"
#include "ulam.hpp"

namespace vasiplab {

/// phi sampled at bin centers, one column per component.
inline Eigen::MatrixXd sample_on_grid(const Observable& phi, Eigen::Index n_bins) {
  return phi.sample(bin_centers(n_bins));
}

/// Pushes the Lebesgue density through the schedule: P^k 1 for k = 0..n,
/// delivered to fn(k, density). For stationary schedules the push stops once
/// the density is numerically fixed.
template <class Fn>
void push_lebesgue(const MapSchedule& s, std::int64_t n, Eigen::Index n_bins, OperatorCache& cache, Fn&& fn) {
  DensityGrid h = DensityGrid::Ones(n_bins);
  fn(std::int64_t{0}, h);
  const bool stationary = s.is_stationary();
  bool frozen = false;
  for (std::int64_t k = 1; k <= n; ++k) {
    if (!frozen) {
      DensityGrid next = cache.get(s.beta(k), n_bins)->apply(h);
      if (stationary && l1_norm(next - h) < 1e-15) frozen = true;
      h.swap(next);
    }
    fn(k, h);
  }
}

/// Row k holds the integral of phi against P^k 1, i.e. the Lebesgue mean of
/// phi o T^k, for k = 0..n.
inline Eigen::MatrixXd ulam_means(const Observable& phi, const MapSchedule& s, std::int64_t n, Eigen::Index n_bins,
                                  OperatorCache& cache) {
  const Eigen::MatrixXd grid = sample_on_grid(phi, n_bins);
  Eigen::MatrixXd means(n + 1, phi.dim());
  push_lebesgue(s, n, n_bins, cache, [&](std::int64_t k, const DensityGrid& h) {
    means.row(k) = (grid.transpose() * h).transpose() / static_cast<double>(n_bins);
  });
  return means;
}

inline Eigen::MatrixXd ulam_means(const Observable& phi, const MapSchedule& s, std::int64_t n, Eigen::Index n_bins) {
  OperatorCache cache(s.alpha_max());
  return ulam_means(phi, s, n, n_bins, cache);
}

enum class CenteringMethod { ulam, ensemble };

/// phi_k = phi - E[phi o T^k] with the estimated mean and its standard error
/// (zero for the deterministic Ulam estimate).
struct CenteredObservable {
  Observable phi;
  std::int64_t k = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd standard_error;

  Eigen::VectorXd operator()(double x) const { return phi(x) - mean; }
};

struct CenteringOptions {
  Eigen::Index n_bins = 8192;
  std::uint64_t ensemble_size = 1000000;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

inline CenteredObservable center_observable(const Observable& phi, const MapSchedule& s, std::int64_t k,
                                            CenteringMethod method, const CenteringOptions& opt = {}) {
  if (k < 0) throw ValidationError("centering time must be non-negative");
  CenteredObservable c{phi, k, Eigen::VectorXd::Zero(phi.dim()), Eigen::VectorXd::Zero(phi.dim())};
  if (method == CenteringMethod::ulam) {
    c.mean = ulam_means(phi, s, k, opt.n_bins).row(k).transpose();
    return c;
  }
  EnsembleOptions eo;
  eo.workers = opt.workers;
  const auto finals = sample_ensemble(s, opt.ensemble_size, k, opt.seed, eo).finals();
  const int d = phi.dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd v(d);
  for (double x : finals) {
    phi.eval(x, v.data());
    sum += v;
    sq += v.cwiseProduct(v);
  }
  const auto m = static_cast<double>(finals.size());
  c.mean = sum / m;
  const Eigen::VectorXd var = (sq / m - c.mean.cwiseProduct(c.mean)) * (m / std::max(m - 1.0, 1.0));
  c.standard_error = (var.cwiseMax(0.0) / m).cwiseSqrt();
  return c;
}

}  // namespace vasiplab
