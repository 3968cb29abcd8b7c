#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "json.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace vasiplab {

struct CovSplit {
  Eigen::MatrixXd A, A1, A2, A3;
  double t = 0.0;
  Eigen::MatrixXd Q;       // eigenvectors of A
  Eigen::VectorXd lambda;  // eigenvalues of A, snapped to t when within rounding

  /// Diagonals of A1, A2, A3 in the eigenbasis of A.
  Eigen::VectorXd mu1() const { return lambda.cwiseMin(t); }
  Eigen::VectorXd mu2() const { return lambda - mu1(); }
  Eigen::VectorXd mu3() const { return Eigen::VectorXd::Constant(lambda.size(), t) - mu1(); }
};

/// A = Q diag(lambda) Q^T, A1 = Q diag(min(lambda, t)) Q^T, A2 = A - A1,
/// A3 = t I - A1.
inline CovSplit split_covariance(const Eigen::MatrixXd& A, double t) {
  require_symmetric(A, "A");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("t must be a finite non-negative number");
  const Eigen::Index d = A.rows();
  CovSplit s;
  s.A = 0.5 * (A + A.transpose());
  s.t = t;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.A);
  s.Q = es.eigenvectors();
  s.lambda = es.eigenvalues();
  const double scale = std::max(1.0, s.lambda.cwiseAbs().maxCoeff());
  if (d > 0 && s.lambda.minCoeff() < -1e-10 * scale) throw ValidationError("A is not positive semidefinite");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(s.lambda[i] - t) <= 1e-12 * std::max(1.0, t)) s.lambda[i] = t;
    s.lambda[i] = std::max(s.lambda[i], 0.0);
  }
  auto rebuild = [&](const Eigen::VectorXd& mu) {
    Eigen::MatrixXd m = s.Q * mu.asDiagonal() * s.Q.transpose();
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  s.A1 = rebuild(s.mu1());
  s.A2 = s.A - s.A1;
  s.A3 = t * Eigen::MatrixXd::Identity(d, d) - s.A1;
  return s;
}

struct GaussianTriple {
  Eigen::VectorXd g1, g2, g3;
};

/// Draw number `draw` of independent N(0, A1), N(0, A2), N(0, A3) vectors,
/// factored through the common eigenbasis.
inline GaussianTriple synth_gaussians(const CovSplit& s, std::uint64_t seed, std::uint64_t draw = 0) {
  const Eigen::Index d = s.lambda.size();
  CounterStream rng(seed, draw);
  auto sample = [&](const Eigen::VectorXd& mu) {
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal() * std::sqrt(std::max(mu[i], 0.0));
    return Eigen::VectorXd(s.Q * z);
  };
  GaussianTriple g;
  g.g1 = sample(s.mu1());
  g.g2 = sample(s.mu2());
  g.g3 = sample(s.mu3());
  return g;
}

inline nlohmann::json to_json(const CovSplit& s) {
  return {{"t", s.t},
          {"A", matrix_json(s.A)},
          {"A1", matrix_json(s.A1)},
          {"A2", matrix_json(s.A2)},
          {"A3", matrix_json(s.A3)},
          {"eigenvalues", vector_json(s.lambda)}};
}

using CovarianceSequence = std::function<Eigen::MatrixXd(std::int64_t k)>;

struct EmbedResult {
  std::vector<std::int64_t> m;  // block ends floor((n+1)^c)
  std::vector<double> error;    // |sum_{k<=m} G_k - B_m|
  double fitted_exponent = 0.0;
  double c = 0.0;
};

/// Couples independent Gaussian increments G_k ~ N(0, H_k) with a Brownian
/// motion over blocks (floor(n^c), floor((n+1)^c)]: per block, the sum of the
/// G_k is g1 + g2 and the Brownian increment is g1 + g3. Reports the error at
/// block ends and the log-log growth exponent of its running maximum.
inline EmbedResult embed_matching_error(const CovarianceSequence& H, double c, std::uint64_t seed,
                                        std::int64_t horizon) {
  if (!(c > 1.0)) throw ValidationError("block exponent c must exceed 1");
  if (horizon < 2) throw ValidationError("horizon must cover at least two blocks");
  const Eigen::MatrixXd H1 = H(1);
  const Eigen::Index d = H1.rows();
  EmbedResult r;
  r.c = c;
  Eigen::VectorXd err = Eigen::VectorXd::Zero(d);
  std::int64_t prev = 0;
  std::vector<std::pair<double, double>> pts;
  double running = 0.0;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const auto end = static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(n + 1), c) + 1e-9));
    if (end <= prev) continue;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    for (std::int64_t k = prev + 1; k <= end; ++k) A += k == 1 ? H1 : H(k);
    const CovSplit split = split_covariance(A, static_cast<double>(end - prev));
    if (split.lambda.size() > 0 && split.lambda.maxCoeff() > 1e12 * std::max(split.lambda.minCoeff(), 1e-300) &&
        split.lambda.minCoeff() > 0.0)
      throw NumericalError("block covariance is ill-conditioned");
    const auto g = synth_gaussians(split, seed, static_cast<std::uint64_t>(n));
    err += g.g2 - g.g3;
    r.m.push_back(end);
    r.error.push_back(err.norm());
    running = std::max(running, err.norm());
    pts.emplace_back(static_cast<double>(end), running);
    prev = end;
  }
  if (running == 0.0) {
    r.fitted_exponent = -INFINITY;
    return r;
  }
  r.fitted_exponent = fit_loglog(pts, 0.0, INFINITY, 0.0).line.slope;
  return r;
}

/// alpha_k = 16 d log(T) / T + 4 sqrt(lambda) T^d + delta.
inline double bp_alpha(double T, double lambda, double delta, int d) {
  if (!(T > 1.0)) throw DomainError("T must exceed 1");
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  if (!(delta >= 0.0)) throw DomainError("delta must be non-negative");
  if (d < 1) throw DomainError("d must be at least 1");
  return 16.0 * d * std::log(T) / T + 4.0 * std::sqrt(lambda) * std::pow(T, d) + delta;
}

struct BPSeriesOptions {
  std::optional<double> variance_exponent;  // c - gamma (c+1); default from vasip_gamma(1/4, d)
  double convergence_exponent = 1.05;
};

struct BPSeriesReport {
  double kappa = 0.0, v = 0.0;
  int d = 1;
  std::int64_t N = 0;
  double expected_rate = 0.0;  // min(kappa, v/2 - d kappa)
  double fitted_exponent = 0.0;
  double variance_exponent = 0.0;
  bool convergent = false;
  std::vector<std::pair<std::int64_t, double>> partial_sums;
};

/// alpha_n with T_n = n^kappa, lambda_n = n^-v and delta_n the Gaussian tail
/// P(|N(0, n^(c - gamma(c+1)))| > T_n / 4), for n = 2..N. The envelope
/// exponent is fitted over [N/10, N].
inline BPSeriesReport bp_series_check(double kappa, double v, int d, std::int64_t N, const BPSeriesOptions& opt = {}) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  if (N < 20) throw ValidationError("N must be at least 20");
  BPSeriesReport r;
  r.kappa = kappa;
  r.v = v;
  r.d = d;
  r.N = N;
  r.expected_rate = std::min(kappa, v / 2.0 - d * kappa);
  if (opt.variance_exponent) {
    r.variance_exponent = *opt.variance_exponent;
  } else {
    const auto p = vasip_gamma(0.25, d);
    r.variance_exponent = p.c - p.gamma * (p.c + 1.0);
  }
  std::vector<std::pair<double, double>> pts;
  double sum = 0.0;
  std::int64_t next_report = 10;
  for (std::int64_t n = 2; n <= N; ++n) {
    const double x = static_cast<double>(n);
    const double T = std::pow(x, kappa);
    const double s = std::sqrt(std::pow(x, r.variance_exponent));
    const double delta = std::erfc(T / (4.0 * s * std::sqrt(2.0)));
    const double a = bp_alpha(T, std::pow(x, -v), delta, d);
    sum += a;
    if (10 * n >= N) pts.emplace_back(x, a);
    if (n == next_report || n == N) {
      r.partial_sums.emplace_back(n, sum);
      if (n == next_report) next_report *= 10;
    }
  }
  r.fitted_exponent = -fit_loglog(pts, 0.0, INFINITY, 0.0).line.slope;
  r.convergent = r.fitted_exponent > opt.convergence_exponent;
  return r;
}

inline nlohmann::json to_json(const BPSeriesReport& r) {
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& [n, s] : r.partial_sums) ps.push_back({n, s});
  return {{"kappa", r.kappa},
          {"v", r.v},
          {"d", r.d},
          {"N", r.N},
          {"expected_rate", r.expected_rate},
          {"fitted_exponent", r.fitted_exponent},
          {"variance_exponent", r.variance_exponent},
          {"convergent", r.convergent},
          {"partial_sums", ps}};
}

inline nlohmann::json to_json(const EmbedResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t i = 0; i < r.m.size(); ++i) pts.push_back({r.m[i], r.error[i]});
  return {{"c", r.c},
          {"fitted_exponent", std::isfinite(r.fitted_exponent) ? nlohmann::json(r.fitted_exponent) : nlohmann::json(nullptr)},
          {"errors", pts}};
}

}  // namespace vasiplab
