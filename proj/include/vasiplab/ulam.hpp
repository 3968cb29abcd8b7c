#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "error.hpp"
#include "parallel.hpp"
#include "pm_map.hpp"

namespace vasiplab {

/// Piecewise-constant density on N uniform bins of [0, 1].
using DensityGrid = Eigen::VectorXd;

inline double integral(const DensityGrid& f) { return f.size() ? f.mean() : 0.0; }
inline double l1_norm(const DensityGrid& f) { return f.size() ? f.cwiseAbs().mean() : 0.0; }

inline Eigen::VectorXd bin_centers(Eigen::Index n_bins) {
  return (Eigen::VectorXd::LinSpaced(n_bins, 0.0, static_cast<double>(n_bins - 1)).array() + 0.5) /
         static_cast<double>(n_bins);
}

/// Ulam matrix P(i, j) = m(B_i n T^-1 B_j) / m(B_i). Densities are pushed
/// forward by f -> P^T f; the transpose is stored so that apply() is a
/// row-major product.
class UlamOperator {
 public:
  using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  UlamOperator(PMParam p, Eigen::Index n_bins, unsigned workers = 0) : param_(p), n_(n_bins) {
    if (n_bins < 2) throw ValidationError("n_bins must be at least 2");
    assemble(workers);
  }

  Eigen::Index n_bins() const noexcept { return n_; }
  const PMParam& param() const noexcept { return param_; }
  double beta() const noexcept { return param_.beta; }
  const SpMat& matrix() const noexcept { return p_; }
  const SpMat& transpose() const noexcept { return pt_; }

  /// Pushes a density, or a block of densities column by column.
  template <class Derived>
  Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> apply(const Eigen::MatrixBase<Derived>& f) const {
    if (f.rows() != n_)
      throw DimensionMismatch("density has " + std::to_string(f.rows()) + " bins, operator has " + std::to_string(n_));
    return pt_ * f.derived();
  }

  /// Coordinate list with header "i,j,value".
  void write_csv(std::ostream& os) const {
    os << "i,j,value\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < p_.outerSize(); ++i)
      for (SpMat::InnerIterator it(p_, i); it; ++it) os << it.row() << ',' << it.col() << ',' << it.value() << '\n';
  }

 private:
  void assemble(unsigned workers) {
    const double h = 1.0 / static_cast<double>(n_);
    std::vector<double> left(static_cast<std::size_t>(n_) + 1);
    for_each_chunk(left.size(), 512, resolve_workers(workers), [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) left[j] = pm_left_inverse(param_.beta, static_cast<double>(j) * h);
    });
    left.front() = 0.0;
    left.back() = 0.5;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n_) * 6);
    // Spread the preimage [lo, hi] of target bin j over the source bins it meets.
    auto spread = [&](double lo, double hi, Eigen::Index j) {
      if (hi <= lo) return;
      auto i0 = static_cast<Eigen::Index>(std::floor(lo * static_cast<double>(n_)));
      i0 = std::clamp<Eigen::Index>(i0, 0, n_ - 1);
      for (Eigen::Index i = i0; i < n_; ++i) {
        const double a = std::max(lo, static_cast<double>(i) * h);
        const double b = std::min(hi, static_cast<double>(i + 1) * h);
        if (b > a) trip.emplace_back(i, j, (b - a) * static_cast<double>(n_));
        if (static_cast<double>(i + 1) * h >= hi) break;
      }
    };
    for (Eigen::Index j = 0; j < n_; ++j) {
      const double y0 = static_cast<double>(j) * h;
      const double y1 = static_cast<double>(j + 1) * h;
      spread(left[static_cast<std::size_t>(j)], left[static_cast<std::size_t>(j) + 1], j);
      spread(pm_right_inverse(y0), pm_right_inverse(y1), j);
    }
    p_.resize(n_, n_);
    p_.setFromTriplets(trip.begin(), trip.end());
    // Renormalize rows against floating residue from the interval arithmetic.
    for (Eigen::Index i = 0; i < n_; ++i) {
      double s = 0.0;
      for (SpMat::InnerIterator it(p_, i); it; ++it) s += it.value();
      for (SpMat::InnerIterator it(p_, i); it; ++it) it.valueRef() /= s;
    }
    p_.makeCompressed();
    pt_ = SpMat(p_.transpose());
    pt_.makeCompressed();
  }

  PMParam param_;
  Eigen::Index n_;
  SpMat p_;
  SpMat pt_;
};

inline UlamOperator ulam_matrix(const PMParam& p, Eigen::Index n_bins, unsigned workers = 0) {
  return UlamOperator(p, n_bins, workers);
}

template <class Derived>
auto apply(const UlamOperator& op, const Eigen::MatrixBase<Derived>& f) {
  return op.apply(f);
}

/// P^n = P_n o ... o P_1 applied by successive matrix-vector products.
class SequentialPipeline {
 public:
  SequentialPipeline() = default;
  explicit SequentialPipeline(std::vector<std::shared_ptr<const UlamOperator>> ops) : ops_(std::move(ops)) {
    for (const auto& op : ops_)
      if (op->n_bins() != ops_.front()->n_bins()) throw DimensionMismatch("pipeline operators differ in n_bins");
  }

  std::size_t size() const noexcept { return ops_.size(); }

  template <class Vec>
  Vec apply(Vec f) const {
    for (const auto& op : ops_) f = op->apply(f);
    return f;
  }

 private:
  std::vector<std::shared_ptr<const UlamOperator>> ops_;
};

inline SequentialPipeline compose_sequential(std::vector<std::shared_ptr<const UlamOperator>> ops) {
  return SequentialPipeline(std::move(ops));
}

/// Shares one assembled operator per distinct (beta, n_bins). Thread-safe.
class OperatorCache {
 public:
  explicit OperatorCache(double alpha_max = 0.49, unsigned workers = 0) : alpha_max_(alpha_max), workers_(workers) {}

  std::shared_ptr<const UlamOperator> get(double beta, Eigen::Index n_bins) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(beta, n_bins);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto op = std::make_shared<const UlamOperator>(PMParam(beta, std::max(alpha_max_, beta)), n_bins, workers_);
    cache_.emplace(key, op);
    return op;
  }

 private:
  double alpha_max_;
  unsigned workers_;
  std::mutex mutex_;
  std::map<std::pair<double, Eigen::Index>, std::shared_ptr<const UlamOperator>> cache_;
};

/// Fixed point of a single operator by power iteration from the uniform density.
inline DensityGrid invariant_density(const UlamOperator& op, double tol = 1e-13, int max_iter = 200000) {
  DensityGrid f = DensityGrid::Ones(op.n_bins());
  for (int it = 0; it < max_iter; ++it) {
    DensityGrid g = op.apply(f);
    g /= integral(g);
    const double diff = l1_norm(g - f);
    f.swap(g);
    if (diff < tol) return f;
  }
  throw NumericalError("power iteration for the invariant density did not converge");
}

}  // namespace vasiplab
