#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "centering.hpp"
#include "covariance.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "json.hpp"
#include "observable.hpp"
#include "pm_map.hpp"
#include "ulam.hpp"

namespace vasiplab {

struct GreenKubo {
  Eigen::MatrixXd sigma2;
  std::vector<Eigen::MatrixXd> terms;  // terms[i](a, b) = E[phi_a o T^i * phi_b]
  double tail_bound = 0.0;
  std::string tail_model;  // "geometric", "power", "vanished" or "none"
  double tail_rate = 0.0;
  bool converged = false;
  Eigen::Index n_bins = 0;
};

struct GreenKuboOptions {
  double floor = 1e-15;
  unsigned workers = 0;
};

namespace detail {

/// Tail of sum_{i>n} t_i from the better of a geometric and a power-law
/// fit to the second half of the term norms, counted twice for c_i + c_i^T.
inline void fit_tail(GreenKubo& gk, const std::vector<double>& norms, double floor) {
  const std::size_t n = norms.size() - 1;
  std::vector<double> xi, xl, y;
  for (std::size_t i = std::max<std::size_t>(1, n / 2); i <= n; ++i) {
    if (!(norms[i] > floor)) continue;
    xi.push_back(static_cast<double>(i));
    xl.push_back(std::log(static_cast<double>(i)));
    y.push_back(std::log(norms[i]));
  }
  if (n == 0) {
    gk.tail_model = "none";
    gk.tail_bound = INFINITY;
    return;
  }
  if (y.size() < 2) {
    gk.tail_model = "vanished";
    gk.tail_bound = norms[n] > floor ? 2.0 * norms[n] : 0.0;
    return;
  }
  const LineFit geo = fit_line(xi, y);
  const LineFit pow = fit_line(xl, y);
  const double last = std::exp(y.back());
  const double nn = xi.back();
  if (geo.r2 >= pow.r2) {
    const double r = std::exp(geo.slope);
    gk.tail_model = "geometric";
    gk.tail_rate = r;
    gk.tail_bound = r < 1.0 ? 2.0 * last * r / (1.0 - r) : INFINITY;
  } else {
    gk.tail_model = "power";
    gk.tail_rate = pow.slope;
    gk.tail_bound = pow.slope < -1.0 ? 2.0 * last * nn / (-pow.slope - 1.0) : INFINITY;
  }
}

}  // namespace detail

/// sigma^2 = c_0 + sum_{i=1}^{n_terms} (c_i + c_i^T) under the Ulam invariant
/// density of the map with parameter p.
inline GreenKubo green_kubo(const Observable& phi, const PMParam& p, int n_terms, Eigen::Index n_bins,
                            const GreenKuboOptions& opt = {}) {
  if (n_terms < 0) throw ValidationError("n_terms must be non-negative");
  const UlamOperator op(p, n_bins, opt.workers);
  const DensityGrid h = invariant_density(op);
  const double N = static_cast<double>(n_bins);
  Eigen::MatrixXd grid = sample_on_grid(phi, n_bins);
  const Eigen::RowVectorXd mean = (grid.transpose() * h).transpose() / N;
  grid.rowwise() -= mean;

  GreenKubo gk;
  gk.n_bins = n_bins;
  Eigen::MatrixXd f = grid.array().colwise() * h.array();
  std::vector<double> norms;
  for (int i = 0; i <= n_terms; ++i) {
    if (i > 0) f = op.apply(f);
    gk.terms.push_back(grid.transpose() * f / N);
    norms.push_back(gk.terms.back().norm());
  }
  gk.sigma2 = gk.terms[0];
  for (int i = 1; i <= n_terms; ++i) gk.sigma2 += gk.terms[static_cast<std::size_t>(i)] + gk.terms[static_cast<std::size_t>(i)].transpose();
  gk.sigma2 = 0.5 * (gk.sigma2 + gk.sigma2.transpose());
  detail::fit_tail(gk, norms, opt.floor);
  gk.converged = gk.tail_bound <= 1e-3 + 0.05 * gk.sigma2.norm();
  return gk;
}

inline nlohmann::json to_json(const GreenKubo& gk) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : gk.terms) terms.push_back(matrix_json(t));
  return {{"sigma2", matrix_json(gk.sigma2)},
          {"terms", terms},
          {"tail_bound", std::isfinite(gk.tail_bound) ? nlohmann::json(gk.tail_bound) : nlohmann::json(nullptr)},
          {"tail_model", gk.tail_model},
          {"tail_rate", gk.tail_rate},
          {"converged", gk.converged},
          {"n_bins", gk.n_bins}};
}

}  // namespace vasiplab
