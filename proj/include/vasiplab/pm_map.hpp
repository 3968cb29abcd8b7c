#pragma once

#include <cmath>
#include <string>

#include "error.hpp"

namespace vasiplab {

/// One member of the intermittent family. `alpha_max` is the uniform bound
/// the whole schedule promises to stay under.
struct PMParam {
  double beta = 0.0;
  double alpha_max = 0.49;

  PMParam() = default;
  PMParam(double beta_, double alpha_max_) : beta(beta_), alpha_max(alpha_max_) {
    if (!(alpha_max > 0.0 && alpha_max < 0.5))
      throw DomainError("alpha_max must lie in (0, 1/2), got " + std::to_string(alpha_max));
    if (!(beta >= 0.0 && beta < 0.5))
      throw DomainError("beta must lie in [0, 1/2), got " + std::to_string(beta));
    if (beta > alpha_max)
      throw DomainError("beta " + std::to_string(beta) + " exceeds alpha_max " +
                        std::to_string(alpha_max));
  }
};

/// Unchecked map step. x + 2^b x^(1+b) is written x + x (2x)^b so that
/// x = 1/2 lands on 1 exactly.
inline double pm_step(double beta, double x) noexcept {
  if (x <= 0.5) {
    if (beta == 0.0) return 2.0 * x;
    return x + x * std::pow(2.0 * x, beta);
  }
  return 2.0 * x - 1.0;
}

inline double pm_map(const PMParam& p, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x must lie in [0, 1], got " + std::to_string(x));
  if (!(p.beta >= 0.0 && p.beta < 0.5)) throw DomainError("beta must lie in [0, 1/2)");
  return pm_step(p.beta, x);
}

/// Inverse of the left branch [0, 1/2] -> [0, 1] by bisection. Monotone, so
/// 64 halvings reach the spacing of doubles on [0, 1/2].
inline double pm_left_inverse(double beta, double y) {
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return 0.5;
  if (beta == 0.0) return 0.5 * y;
  double lo = 0.0, hi = 0.5;
  for (int it = 0; it < 64 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (pm_step(beta, mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double pm_right_inverse(double y) noexcept { return 0.5 * (y + 1.0); }

/// Lipschitz constant of the map on [0, 1] (left-branch slope at 1/2).
inline double pm_lipschitz(double beta) noexcept { return 2.0 + beta; }

}  // namespace vasiplab
