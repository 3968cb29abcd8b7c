#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "observable.hpp"
#include "parallel.hpp"
#include "pm_map.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace vasiplab {

struct Orbit {
  double x0 = 0.0;
  std::vector<double> points;  // points[k-1] = T^k(x0)

  std::size_t length() const noexcept { return points.size(); }
};

inline void check_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1], got " + std::to_string(x));
}

/// Calls fn(k, x_k) for k = 1..n with x_k = T_k(x_{k-1}); nothing is stored.
template <class Fn>
void stream_orbit(const MapSchedule& s, double x0, std::int64_t n, Fn&& fn) {
  check_unit(x0, "x0");
  double x = x0;
  for (std::int64_t k = 1; k <= n; ++k) {
    x = pm_step(s.beta(k), x);
    fn(k, x);
  }
}

inline Orbit iterate_orbit(const MapSchedule& s, double x0, std::int64_t n) {
  if (n < 0) throw ValidationError("orbit length must be non-negative");
  Orbit o{x0, {}};
  o.points.reserve(static_cast<std::size_t>(n));
  stream_orbit(s, x0, n, [&](std::int64_t, double x) { o.points.push_back(x); });
  return o;
}

/// Lookup table of beta_k for k = 1..n so hot loops avoid schedule dispatch.
inline std::vector<double> beta_table(const MapSchedule& s, std::int64_t n) {
  std::vector<double> b(static_cast<std::size_t>(n) + 1, 0.0);
  if (s.kind() == MapSchedule::Kind::constant) {
    std::fill(b.begin() + 1, b.end(), s.values()[0]);
    return b;
  }
  for (std::int64_t k = 1; k <= n; ++k) b[static_cast<std::size_t>(k)] = s.beta(k);
  return b;
}

/// Chooses x_0 for orbit i; the stream is that orbit's private generator.
using InitialSampler = std::function<double(std::uint64_t orbit, CounterStream& stream)>;

inline double uniform_initial(std::uint64_t, CounterStream& stream) { return stream.uniform01(); }

/// Floating iteration of expanding maps sheds one mantissa bit per doubling,
/// so long runs collapse onto 0. Ensemble runs add a perturbation of size
/// 2^-53 per step from the orbit's own stream, reflected back into [0, 1].
inline double dither(double x, CounterStream& stream) {
  constexpr double kScale = 0x1p-52;
  double y = x + (stream.uniform01() - 0.5) * kScale;
  if (y < 0.0) y = -y;
  if (y > 1.0) y = 2.0 - y;
  return y;
}

struct EnsembleOptions {
  bool dither = true;
  unsigned workers = 0;  // 0: VASIPLAB_WORKERS or 1
  std::size_t chunk = 256;
  InitialSampler initial = uniform_initial;
};

/// m orbits of length n whose initial points are i.i.d. draws keyed by
/// (seed, orbit index). Orbit i is a pure function of (schedule, seed, i).
class Ensemble {
 public:
  Ensemble(MapSchedule s, std::uint64_t m, std::int64_t n, std::uint64_t seed, EnsembleOptions opt = {})
      : s_(std::move(s)), m_(m), n_(n), seed_(seed), opt_(std::move(opt)), betas_(beta_table(s_, n)) {
    if (m_ < 1) throw ValidationError("ensemble size must be at least 1");
    if (n_ < 0) throw ValidationError("orbit length must be non-negative");
  }

  std::uint64_t size() const noexcept { return m_; }
  std::int64_t length() const noexcept { return n_; }
  const MapSchedule& schedule() const noexcept { return s_; }
  const std::vector<double>& betas() const noexcept { return betas_; }

  CounterStream stream(std::uint64_t i) const { return CounterStream(seed_, i); }

  template <class Fn>
  void stream_orbit(std::uint64_t i, Fn&& fn) const {
    CounterStream rng = stream(i);
    double x = opt_.initial(i, rng);
    check_unit(x, "initial point");
    fn(std::int64_t{0}, x);
    for (std::int64_t k = 1; k <= n_; ++k) {
      x = pm_step(betas_[static_cast<std::size_t>(k)], x);
      if (opt_.dither) x = dither(x, rng);
      fn(k, x);
    }
  }

  Orbit orbit(std::uint64_t i) const {
    Orbit o;
    o.points.reserve(static_cast<std::size_t>(n_));
    stream_orbit(i, [&](std::int64_t k, double x) {
      if (k == 0)
        o.x0 = x;
      else
        o.points.push_back(x);
    });
    return o;
  }

  /// Final coordinates x_n of every orbit.
  std::vector<double> finals() const {
    std::vector<double> out(m_);
    for_each_chunk(m_, opt_.chunk, resolve_workers(opt_.workers), [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) stream_orbit(i, [&](std::int64_t k, double x) {
          if (k == n_) out[i] = x;
        });
    });
    return out;
  }

  class iterator {
   public:
    using value_type = Orbit;
    using difference_type = std::ptrdiff_t;
    iterator(const Ensemble* e, std::uint64_t i) : e_(e), i_(i) {}
    Orbit operator*() const { return e_->orbit(i_); }
    iterator& operator++() {
      ++i_;
      return *this;
    }
    bool operator==(const iterator& o) const { return i_ == o.i_; }
    bool operator!=(const iterator& o) const { return i_ != o.i_; }

   private:
    const Ensemble* e_;
    std::uint64_t i_;
  };

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, m_}; }

  const EnsembleOptions& options() const noexcept { return opt_; }

 private:
  MapSchedule s_;
  std::uint64_t m_;
  std::int64_t n_;
  std::uint64_t seed_;
  EnsembleOptions opt_;
  std::vector<double> betas_;
};

inline Ensemble sample_ensemble(const MapSchedule& s, std::uint64_t m, std::int64_t n, std::uint64_t seed,
                                EnsembleOptions opt = {}) {
  return Ensemble(s, m, n, seed, std::move(opt));
}

/// Birkhoff sums S_n = sum_{k=1}^n (phi(x_k) - mean_k) recorded at checkpoints.
struct EnsembleSums {
  std::vector<std::int64_t> checkpoints;
  std::vector<Eigen::MatrixXd> sums;     // per checkpoint: m x d
  std::vector<Eigen::VectorXd> max_sq;   // per checkpoint: max_{k<=n} |S_k|^2 per orbit (if tracked)
  int dim = 0;

  std::size_t orbits() const { return sums.empty() ? 0 : static_cast<std::size_t>(sums.front().rows()); }
};

struct SumsOptions {
  bool track_max = false;
};

/// `means` holds the centering constants: row k is the mean subtracted from
/// phi(x_k), for k = 1..n (row 0 unused). Checkpoints must be increasing and
/// within [1, n].
inline EnsembleSums ensemble_sums(const Ensemble& ens, const Observable& phi, const Eigen::MatrixXd& means,
                                  const std::vector<std::int64_t>& checkpoints, SumsOptions sopt = {}) {
  const int d = phi.dim();
  const std::int64_t n = ens.length();
  if (means.rows() < n + 1 || means.cols() != d)
    throw DimensionMismatch("centering table must have n+1 rows and d columns");
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    if (checkpoints[c] < 1 || checkpoints[c] > n || (c > 0 && checkpoints[c] <= checkpoints[c - 1]))
      throw ValidationError("checkpoints must be strictly increasing within [1, n]");
  }
  const auto m = ens.size();
  EnsembleSums out;
  out.checkpoints = checkpoints;
  out.dim = d;
  out.sums.assign(checkpoints.size(), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), d));
  if (sopt.track_max) out.max_sq.assign(checkpoints.size(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m)));
  const unsigned workers = resolve_workers(ens.options().workers);
  for_each_chunk(m, ens.options().chunk, workers, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<double> val(static_cast<std::size_t>(d)), acc(static_cast<std::size_t>(d));
    for (std::size_t i = b; i < e; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      std::size_t next = 0;
      double running_max = 0.0;
      ens.stream_orbit(i, [&](std::int64_t k, double x) {
        if (k == 0 || next >= checkpoints.size()) return;
        phi.eval(x, val.data());
        double sq = 0.0;
        for (int c = 0; c < d; ++c) {
          acc[static_cast<std::size_t>(c)] += val[static_cast<std::size_t>(c)] - means(k, c);
          sq += acc[static_cast<std::size_t>(c)] * acc[static_cast<std::size_t>(c)];
        }
        if (sopt.track_max) running_max = std::max(running_max, sq);
        if (k == checkpoints[next]) {
          for (int c = 0; c < d; ++c)
            out.sums[next](static_cast<Eigen::Index>(i), c) = acc[static_cast<std::size_t>(c)];
          if (sopt.track_max) out.max_sq[next][static_cast<Eigen::Index>(i)] = running_max;
          ++next;
        }
      });
    }
  });
  return out;
}

/// floor(rho^j) for j = 0, 1, ..., deduplicated, always ending at n.
inline std::vector<std::int64_t> geometric_checkpoints(std::int64_t n_min, std::int64_t n, double rho = 1.3) {
  std::vector<std::int64_t> out;
  if (n < 1) return out;
  n_min = std::max<std::int64_t>(n_min, 1);
  double v = 1.0;
  while (true) {
    const auto k = static_cast<std::int64_t>(std::floor(v));
    if (k > n) break;
    if (k >= n_min && (out.empty() || k > out.back())) out.push_back(k);
    v *= rho;
  }
  if (out.empty() || out.back() != n) out.push_back(n);
  return out;
}

}  // namespace vasiplab
