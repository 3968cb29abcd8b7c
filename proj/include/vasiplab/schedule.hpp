#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "driver.hpp"
#include "error.hpp"
#include "json.hpp"
#include "pm_map.hpp"

namespace vasiplab {

/// Sequence beta_1, beta_2, ... generated on demand. Time indices are 1-based:
/// T^n = T_n o ... o T_1 uses beta(1) first.
class MapSchedule {
 public:
  enum class Kind { constant, list, periodic, driver };

  static MapSchedule constant(double beta, double alpha_max) {
    MapSchedule s(Kind::constant, alpha_max);
    s.values_ = {beta};
    s.validate();
    return s;
  }

  /// Finite list; times past the end repeat the final value.
  static MapSchedule list(std::vector<double> betas, double alpha_max) {
    MapSchedule s(Kind::list, alpha_max);
    s.values_ = std::move(betas);
    s.validate();
    return s;
  }

  static MapSchedule periodic(std::vector<double> betas, double alpha_max) {
    MapSchedule s(Kind::periodic, alpha_max);
    s.values_ = std::move(betas);
    s.validate();
    return s;
  }

  /// beta_k = beta(sigma^(k-1) omega), where omega sits at driver time `omega`.
  static MapSchedule driven(Driver driver, double alpha_max, std::int64_t omega = 0) {
    MapSchedule s(Kind::driver, alpha_max);
    s.values_ = driver.betas();
    s.driver_ = std::move(driver);
    s.omega_ = omega;
    s.validate();
    return s;
  }

  Kind kind() const noexcept { return kind_; }
  double alpha_max() const noexcept { return alpha_max_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::optional<Driver>& driver() const noexcept { return driver_; }
  std::int64_t omega() const noexcept { return omega_; }

  double beta(std::int64_t k) const {
    switch (kind_) {
      case Kind::constant:
        return values_[0];
      case Kind::list: {
        const auto idx = std::clamp<std::int64_t>(k - 1, 0, static_cast<std::int64_t>(values_.size()) - 1);
        return values_[static_cast<std::size_t>(idx)];
      }
      case Kind::periodic: {
        const auto len = static_cast<std::int64_t>(values_.size());
        auto idx = (k - 1) % len;
        if (idx < 0) idx += len;
        return values_[static_cast<std::size_t>(idx)];
      }
      case Kind::driver:
        return driver_->beta(omega_ + k - 1);
    }
    return values_[0];
  }

  PMParam param(std::int64_t k) const { return PMParam(beta(k), alpha_max_); }

  /// True when every beta_k is the same map.
  bool is_stationary() const {
    if (kind_ == Kind::constant) return true;
    return std::all_of(values_.begin(), values_.end(), [&](double b) { return b == values_[0]; });
  }

  /// Largest beta the schedule can emit.
  double max_beta() const { return *std::max_element(values_.begin(), values_.end()); }

  /// Same schedule started k steps later: beta'(j) = beta(j + k).
  MapSchedule shifted(std::int64_t k) const {
    MapSchedule s = *this;
    switch (kind_) {
      case Kind::constant:
        break;
      case Kind::driver:
        s.omega_ += k;
        break;
      default:
        s.offset_ += k;
    }
    if (kind_ == Kind::list || kind_ == Kind::periodic) return s.materialize_offset();
    return s;
  }

 private:
  MapSchedule(Kind kind, double alpha_max) : kind_(kind), alpha_max_(alpha_max) {}

  MapSchedule materialize_offset() const {
    if (offset_ == 0) return *this;
    MapSchedule base = *this;
    base.offset_ = 0;
    std::vector<double> v;
    if (kind_ == Kind::periodic) {
      const auto len = static_cast<std::int64_t>(values_.size());
      for (std::int64_t j = 1; j <= len; ++j) v.push_back(base.beta(j + offset_));
    } else {
      const auto len = static_cast<std::int64_t>(values_.size());
      for (std::int64_t j = 1; j <= std::max<std::int64_t>(len - offset_, 1); ++j)
        v.push_back(base.beta(j + offset_));
    }
    base.values_ = std::move(v);
    return base;
  }

  void validate() const {
    if (!(alpha_max_ > 0.0 && alpha_max_ < 0.5))
      throw ValidationError("alpha_max must lie in (0, 1/2)", "/alpha_max");
    if (values_.empty()) throw ValidationError("schedule needs at least one beta", "/betas");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double b = values_[i];
      if (!(b >= 0.0 && b <= alpha_max_))
        throw ValidationError("beta " + std::to_string(b) + " outside [0, alpha_max]",
                              kind_ == Kind::constant ? "/beta" : "/betas/" + std::to_string(i));
    }
  }

  Kind kind_;
  double alpha_max_;
  std::vector<double> values_;
  std::optional<Driver> driver_;
  std::int64_t omega_ = 0;
  std::int64_t offset_ = 0;
};

namespace detail {

inline double require_number(const nlohmann::json& j, const std::string& key, const std::string& base) {
  if (!j.contains(key)) throw ValidationError("missing required field", base + "/" + key);
  if (!j.at(key).is_number()) throw ValidationError("expected a number", base + "/" + key);
  return j.at(key).get<double>();
}

inline std::vector<double> require_number_array(const nlohmann::json& j, const std::string& key,
                                                const std::string& base, bool required = true) {
  std::vector<double> out;
  if (!j.contains(key)) {
    if (required) throw ValidationError("missing required field", base + "/" + key);
    return out;
  }
  const auto& a = j.at(key);
  if (!a.is_array()) throw ValidationError("expected an array", base + "/" + key);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ValidationError("expected a number", base + "/" + key + "/" + std::to_string(i));
    out.push_back(a[i].get<double>());
  }
  return out;
}

inline std::uint64_t optional_seed(const nlohmann::json& j, const std::string& base, std::uint64_t fallback) {
  if (!j.contains("seed")) return fallback;
  const auto& s = j.at("seed");
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
    throw ValidationError("seed must be a non-negative integer", base + "/seed");
  return s.get<std::uint64_t>();
}

}  // namespace detail

/// Driver description: {"driver": "bernoulli"|"rotation", "betas": [...],
/// "seed": n, "weights": [...]}. `partition` is accepted as a synonym of
/// `weights` for rotations.
inline Driver build_driver(const nlohmann::json& spec, std::uint64_t default_seed = 0,
                           const std::string& base = "") {
  if (!spec.is_object()) throw ValidationError("driver spec must be an object", base.empty() ? "/" : base);
  if (!spec.contains("driver") || !spec.at("driver").is_string())
    throw ValidationError("expected \"bernoulli\" or \"rotation\"", base + "/driver");
  const auto kind = spec.at("driver").get<std::string>();
  auto betas = detail::require_number_array(spec, "betas", base);
  const std::string wkey = spec.contains("partition") ? "partition" : "weights";
  auto weights = detail::require_number_array(spec, wkey, base, false);
  const auto seed = detail::optional_seed(spec, base, default_seed);
  if (kind == "bernoulli") return Driver::bernoulli(std::move(betas), seed, std::move(weights));
  if (kind == "rotation") return Driver::rotation(std::move(betas), seed, std::move(weights));
  throw ValidationError("unknown driver \"" + kind + "\"", base + "/driver");
}

/// {"kind": "constant"|"list"|"periodic"|"driver", "beta", "betas",
/// "alpha_max", "seed", plus driver fields when kind is "driver"}.
inline MapSchedule build_schedule(const nlohmann::json& spec, std::uint64_t default_seed = 0,
                                  const std::string& base = "") {
  if (!spec.is_object()) throw ValidationError("schedule spec must be an object", base.empty() ? "/" : base);
  if (!spec.contains("kind") || !spec.at("kind").is_string())
    throw ValidationError("expected one of constant, list, periodic, driver", base + "/kind");
  const auto kind = spec.at("kind").get<std::string>();
  const double alpha_max = detail::require_number(spec, "alpha_max", base);
  try {
    if (kind == "constant") return MapSchedule::constant(detail::require_number(spec, "beta", base), alpha_max);
    if (kind == "list") return MapSchedule::list(detail::require_number_array(spec, "betas", base), alpha_max);
    if (kind == "periodic")
      return MapSchedule::periodic(detail::require_number_array(spec, "betas", base), alpha_max);
    if (kind == "driver") {
      std::int64_t omega = 0;
      if (spec.contains("omega")) {
        if (!spec.at("omega").is_number_integer()) throw ValidationError("expected an integer", base + "/omega");
        omega = spec.at("omega").get<std::int64_t>();
      }
      return MapSchedule::driven(build_driver(spec, default_seed, base), alpha_max, omega);
    }
  } catch (const ValidationError& e) {
    if (!e.path().empty() && e.path().rfind(base, 0) == 0 && !base.empty()) throw;
    if (!base.empty()) throw ValidationError(e.what(), base + e.path());
    throw;
  }
  throw ValidationError("unknown schedule kind \"" + kind + "\"", base + "/kind");
}

inline nlohmann::json to_json(const MapSchedule& s) {
  nlohmann::json j;
  j["alpha_max"] = s.alpha_max();
  switch (s.kind()) {
    case MapSchedule::Kind::constant:
      j["kind"] = "constant";
      j["beta"] = s.values()[0];
      break;
    case MapSchedule::Kind::list:
      j["kind"] = "list";
      j["betas"] = s.values();
      break;
    case MapSchedule::Kind::periodic:
      j["kind"] = "periodic";
      j["betas"] = s.values();
      break;
    case MapSchedule::Kind::driver: {
      const auto& d = *s.driver();
      j["kind"] = "driver";
      j["driver"] = d.kind() == Driver::Kind::bernoulli ? "bernoulli" : "rotation";
      j["betas"] = d.betas();
      j["weights"] = d.weights();
      j["seed"] = d.seed();
      j["omega"] = s.omega();
      break;
    }
  }
  return j;
}

}  // namespace vasiplab
