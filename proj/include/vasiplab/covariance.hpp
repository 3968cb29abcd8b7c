#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "json.hpp"
#include "orbit.hpp"

namespace vasiplab {

/// sigma_n^2 at each checkpoint, with grouped-jackknife standard errors.
struct CovarianceTrace {
  std::vector<std::int64_t> n;
  std::vector<Eigen::MatrixXd> entries;
  std::vector<Eigen::MatrixXd> standard_errors;
  std::vector<double> lambda_min;
  std::size_t orbits = 0;

  int dim() const { return entries.empty() ? 0 : static_cast<int>(entries.front().rows()); }
  std::size_t size() const { return n.size(); }

  /// Index of checkpoint n; throws if absent.
  std::size_t index_of(std::int64_t at) const {
    const auto it = std::find(n.begin(), n.end(), at);
    if (it == n.end()) throw ValidationError("n = " + std::to_string(at) + " is not a checkpoint of the trace");
    return static_cast<std::size_t>(it - n.begin());
  }
};

inline double smallest_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// Unbiased sample covariance of the rows of x.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  return 0.5 * (cov + cov.transpose());
}

namespace detail {

inline Eigen::MatrixXd jackknife_se(const Eigen::MatrixXd& x, int groups) {
  const Eigen::Index m = x.rows(), d = x.cols();
  const int g = static_cast<int>(std::min<Eigen::Index>(groups, m));
  if (g < 2) return Eigen::MatrixXd::Zero(d, d);
  // Leave-one-group-out covariances from group-wise first and second moments.
  std::vector<Eigen::VectorXd> s1(static_cast<std::size_t>(g), Eigen::VectorXd::Zero(d));
  std::vector<Eigen::MatrixXd> s2(static_cast<std::size_t>(g), Eigen::MatrixXd::Zero(d, d));
  std::vector<double> cnt(static_cast<std::size_t>(g), 0.0);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto k = static_cast<std::size_t>(r * g / m);
    s1[k] += x.row(r).transpose();
    s2[k] += x.row(r).transpose() * x.row(r);
    cnt[k] += 1.0;
  }
  Eigen::VectorXd t1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(d, d);
  double total = 0.0;
  for (std::size_t k = 0; k < s1.size(); ++k) {
    t1 += s1[k];
    t2 += s2[k];
    total += cnt[k];
  }
  std::vector<Eigen::MatrixXd> est;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < s1.size(); ++k) {
    const double c = total - cnt[k];
    const Eigen::VectorXd mu = (t1 - s1[k]) / c;
    est.push_back(((t2 - s2[k]) - c * mu * mu.transpose()) / (c - 1.0));
    mean += est.back();
  }
  mean /= g;
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(d, d);
  for (const auto& e : est) var += (e - mean).cwiseAbs2();
  return (var * (g - 1.0) / g).cwiseSqrt();
}

}  // namespace detail

/// Sample covariance of the per-orbit sums at every checkpoint.
inline CovarianceTrace covariance_trace(const EnsembleSums& sums, int jackknife_groups = 20) {
  if (sums.orbits() < 2) throw ValidationError("covariance_trace needs at least two orbits");
  CovarianceTrace t;
  t.orbits = sums.orbits();
  for (std::size_t c = 0; c < sums.checkpoints.size(); ++c) {
    t.n.push_back(sums.checkpoints[c]);
    t.entries.push_back(sample_covariance(sums.sums[c]));
    t.standard_errors.push_back(detail::jackknife_se(sums.sums[c], jackknife_groups));
    t.lambda_min.push_back(smallest_eigenvalue(t.entries.back()));
  }
  return t;
}

/// Trace sigma_n^2 = n * sigma^2 at the given checkpoints, for a known
/// asymptotic covariance.
inline CovarianceTrace linear_trace(const std::vector<std::int64_t>& checkpoints, const Eigen::MatrixXd& sigma2) {
  CovarianceTrace t;
  const double lmin = smallest_eigenvalue(sigma2);
  for (auto n : checkpoints) {
    t.n.push_back(n);
    t.entries.push_back(sigma2 * static_cast<double>(n));
    t.standard_errors.push_back(Eigen::MatrixXd::Zero(sigma2.rows(), sigma2.cols()));
    t.lambda_min.push_back(lmin * static_cast<double>(n));
  }
  return t;
}

/// Header "n,sigma11,sigma12,...,sigmadd,lambda_min" over the upper triangle.
inline std::string trace_csv(const CovarianceTrace& t) {
  std::ostringstream os;
  os.precision(17);
  const int d = t.dim();
  os << "n";
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) os << ",sigma" << a + 1 << b + 1;
  os << ",lambda_min\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << t.n[i];
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) os << ',' << t.entries[i](a, b);
    os << ',' << t.lambda_min[i] << '\n';
  }
  return os.str();
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

struct CovarianceSplit {
  Eigen::MatrixXd w1;  // orthonormal basis columns, eigenvalue > zero_tol
  Eigen::MatrixXd w2;
  Eigen::MatrixXd pi1;
  Eigen::MatrixXd pi2;
  Eigen::VectorXd eigenvalues;
  double zero_tol = 0.0;

  int dim_w1() const { return static_cast<int>(w1.cols()); }
  int dim_w2() const { return static_cast<int>(w2.cols()); }
};

inline void require_symmetric(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) throw DimensionMismatch(std::string(what) + " must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ValidationError(std::string(what) + " is not symmetric");
}

/// Orthogonal split R^d = W1 + W2 by eigenvalue threshold. Default
/// zero_tol is 1e-6 * trace / d.
inline CovarianceSplit covariance_split(const Eigen::MatrixXd& sigma2, std::optional<double> zero_tol = {}) {
  require_symmetric(sigma2, "covariance");
  const Eigen::Index d = sigma2.rows();
  CovarianceSplit s;
  s.zero_tol = zero_tol.value_or(d > 0 ? 1e-6 * sigma2.trace() / static_cast<double>(d) : 0.0);
  if (s.zero_tol < 0.0) throw ValidationError("zero_tol must be non-negative");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sigma2 + sigma2.transpose()));
  s.eigenvalues = es.eigenvalues();
  std::vector<Eigen::Index> keep, drop;
  for (Eigen::Index i = 0; i < d; ++i) (s.eigenvalues[i] > s.zero_tol ? keep : drop).push_back(i);
  s.w1.resize(d, static_cast<Eigen::Index>(keep.size()));
  s.w2.resize(d, static_cast<Eigen::Index>(drop.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) s.w1.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(keep[i]);
  for (std::size_t i = 0; i < drop.size(); ++i) s.w2.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(drop[i]);
  s.pi2 = s.w2 * s.w2.transpose();
  s.pi1 = Eigen::MatrixXd::Identity(d, d) - s.pi2;
  return s;
}

inline nlohmann::json to_json(const CovarianceSplit& s) {
  return {{"dim_w1", s.dim_w1()},
          {"dim_w2", s.dim_w2()},
          {"zero_tol", s.zero_tol},
          {"eigenvalues", vector_json(s.eigenvalues)},
          {"w1", matrix_json(s.w1)},
          {"w2", matrix_json(s.w2)},
          {"pi1", matrix_json(s.pi1)},
          {"pi2", matrix_json(s.pi2)}};
}

/// Applies the linear map `proj` (k x d) to every stored sum.
inline EnsembleSums project_sums(const EnsembleSums& in, const Eigen::MatrixXd& proj) {
  if (proj.cols() != in.dim) throw DimensionMismatch("projection width must match the sum dimension");
  EnsembleSums out;
  out.checkpoints = in.checkpoints;
  out.dim = static_cast<int>(proj.rows());
  for (const auto& s : in.sums) out.sums.push_back(s * proj.transpose());
  return out;
}

}  // namespace vasiplab
