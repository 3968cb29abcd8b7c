#pragma once

// Invertible driving systems for random compositions. A driver position is an
// integer time t; sigma^k omega is the same driver read k steps later, so
// shifting and running backwards are both index arithmetic.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace vasiplab {

class Driver {
 public:
  enum class Kind { bernoulli, rotation };

  /// Two-sided Bernoulli shift: the symbol at each integer time is an
  /// independent draw from `weights` over `betas`.
  static Driver bernoulli(std::vector<double> betas, std::uint64_t seed,
                          std::vector<double> weights = {}) {
    Driver d(Kind::bernoulli, std::move(betas), std::move(weights), seed);
    return d;
  }

  /// Rotation by p/q, a Fibonacci convergent of the golden mean with period
  /// q ~ 1.9e14. `weights` are the lengths of consecutive arcs of the circle
  /// carrying each beta.
  static Driver rotation(std::vector<double> betas, std::uint64_t seed,
                         std::vector<double> weights = {}) {
    Driver d(Kind::rotation, std::move(betas), std::move(weights), seed);
    d.start_ = static_cast<std::int64_t>(seed % static_cast<std::uint64_t>(kRotQ));
    return d;
  }

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Index into betas() of the symbol at time t (any sign).
  std::size_t symbol(std::int64_t t) const {
    const double u = kind_ == Kind::bernoulli ? bernoulli_uniform(t) : rotation_point(t);
    std::size_t k = 0;
    while (k + 1 < cumulative_.size() && u >= cumulative_[k]) ++k;
    return k;
  }

  double beta(std::int64_t t) const { return betas_[symbol(t)]; }

  /// Point of the circle at time t for the rotation driver, in [0, 1).
  double rotation_point(std::int64_t t) const {
    __int128 pos = static_cast<__int128>(start_) + static_cast<__int128>(t) * kRotP;
    pos %= kRotQ;
    if (pos < 0) pos += kRotQ;
    return static_cast<double>(static_cast<std::int64_t>(pos)) / static_cast<double>(kRotQ);
  }

  double max_beta() const {
    double m = 0.0;
    for (double b : betas_) m = std::max(m, b);
    return m;
  }

  static constexpr std::int64_t kRotP = 117669030460994;  // F_69
  static constexpr std::int64_t kRotQ = 190392490709135;  // F_70

 private:
  Driver(Kind kind, std::vector<double> betas, std::vector<double> weights, std::uint64_t seed)
      : kind_(kind), betas_(std::move(betas)), weights_(std::move(weights)), seed_(seed) {
    if (betas_.empty()) throw ValidationError("driver needs at least one beta", "/betas");
    if (weights_.empty()) weights_.assign(betas_.size(), 1.0);
    if (weights_.size() != betas_.size())
      throw ValidationError("weights must match betas in length", "/weights");
    double total = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] > 0.0))
        throw ValidationError("weights must be positive", "/weights/" + std::to_string(i));
      total += weights_[i];
    }
    double acc = 0.0;
    for (double& w : weights_) {
      w /= total;
      acc += w;
      cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
  }

  double bernoulli_uniform(std::int64_t t) const {
    const auto zig = t >= 0 ? 2 * static_cast<std::uint64_t>(t)
                            : 2 * static_cast<std::uint64_t>(-(t + 1)) + 1;
    CounterStream s(derive_seed(seed_, 0xD41), zig);
    return s.uniform01();
  }

  Kind kind_;
  std::vector<double> betas_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::uint64_t seed_;
  std::int64_t start_ = 0;
};

}  // namespace vasiplab
