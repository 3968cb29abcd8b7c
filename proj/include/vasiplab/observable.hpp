#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "pm_map.hpp"

namespace vasiplab {

/// Scalar Lipschitz function on [0, 1] together with a valid Lipschitz bound.
struct Component {
  std::function<double(double)> f;
  double lipschitz = 0.0;
  std::string description;

  double operator()(double x) const { return f(x); }
};

/// Coefficients c_0 + c_1 x + ... evaluated by Horner's rule.
inline Component polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) coeffs = {0.0};
  double lip = 0.0;
  for (std::size_t k = 1; k < coeffs.size(); ++k) lip += static_cast<double>(k) * std::abs(coeffs[k]);
  std::string desc = "poly(";
  for (std::size_t k = 0; k < coeffs.size(); ++k) desc += (k ? "," : "") + std::to_string(coeffs[k]);
  desc += ")";
  return {[c = std::move(coeffs)](double x) {
            double acc = 0.0;
            for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
            return acc;
          },
          lip, desc};
}

/// Linear interpolation through (knots[i], values[i]); constant outside the
/// knot range. Knots must be strictly increasing.
inline Component piecewise_linear(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() != values.size() || knots.empty())
    throw ValidationError("piecewise-linear needs equally many knots and values (at least one)");
  double lip = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) throw ValidationError("knots must be strictly increasing");
    lip = std::max(lip, std::abs(values[i] - values[i - 1]) / (knots[i] - knots[i - 1]));
  }
  return {[k = std::move(knots), v = std::move(values)](double x) {
            if (x <= k.front()) return v.front();
            if (x >= k.back()) return v.back();
            const auto it = std::upper_bound(k.begin(), k.end(), x);
            const auto i = static_cast<std::size_t>(it - k.begin());
            const double t = (x - k[i - 1]) / (k[i] - k[i - 1]);
            return v[i - 1] + t * (v[i] - v[i - 1]);
          },
          lip, "piecewise_linear"};
}

/// psi - psi o T for the map with parameter beta.
inline Component coboundary(Component psi, double beta) {
  const double lip = psi.lipschitz * (1.0 + pm_lipschitz(beta));
  std::string desc = "coboundary(" + psi.description + ")";
  return {[p = std::move(psi.f), beta](double x) { return p(x) - p(pm_step(beta, x)); }, lip, desc};
}

/// R^d-valued observable phi = (phi_1, ..., phi_d).
class Observable {
 public:
  Observable() = default;
  explicit Observable(std::vector<Component> comps) : comps_(std::move(comps)) {
    if (comps_.empty()) throw ValidationError("observable needs at least one component");
  }

  static Observable scalar(Component c) { return Observable({std::move(c)}); }

  int dim() const noexcept { return static_cast<int>(comps_.size()); }
  const Component& component(int i) const { return comps_[static_cast<std::size_t>(i)]; }

  double lipschitz_bound() const {
    double l = 0.0;
    for (const auto& c : comps_) l = std::max(l, c.lipschitz);
    return l;
  }

  void eval(double x, double* out) const {
    for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = comps_[i].f(x);
  }

  Eigen::VectorXd operator()(double x) const {
    Eigen::VectorXd v(dim());
    eval(x, v.data());
    return v;
  }

  /// Values at the given points, one column per component.
  Eigen::MatrixXd sample(const Eigen::VectorXd& xs) const {
    Eigen::MatrixXd m(xs.size(), dim());
    for (Eigen::Index r = 0; r < xs.size(); ++r)
      for (int c = 0; c < dim(); ++c) m(r, c) = comps_[static_cast<std::size_t>(c)].f(xs[r]);
    return m;
  }

 private:
  std::vector<Component> comps_;
};

}  // namespace vasiplab
