#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "error.hpp"

namespace vasiplab {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t count = 0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionMismatch("fit_line: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw NumericalError("fit_line needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw NumericalError("fit_line: x values are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  f.count = n;
  return f;
}

struct LogLogFit {
  LineFit line;
  std::vector<std::pair<double, double>> excluded;  // (n, value) dropped below the floor
};

/// Fits log(value) against log(n) over points with n in [n_min, n_max];
/// values at or below `floor` are dropped and reported.
inline LogLogFit fit_loglog(const std::vector<std::pair<double, double>>& pts, double n_min, double n_max,
                            double floor = 1e-14) {
  std::vector<double> lx, ly;
  LogLogFit out;
  for (const auto& [n, v] : pts) {
    if (n < n_min || n > n_max) continue;
    if (!(v > floor) || !(n > 0.0)) {
      out.excluded.emplace_back(n, v);
      continue;
    }
    lx.push_back(std::log(n));
    ly.push_back(std::log(v));
  }
  out.line = fit_line(lx, ly);
  return out;
}

}  // namespace vasiplab
