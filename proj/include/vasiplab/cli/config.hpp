#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../error.hpp"
#include "json.hpp"
#include "../observable.hpp"

namespace vasiplab::cli {

/// Read-only view of one JSON object with its pointer path, so every
/// validation error names the offending field.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_null() && !j.is_object()) throw ValidationError("expected an object", path_.empty() ? "/" : path_);
  }

  const std::string& path() const noexcept { return path_; }
  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }
  const nlohmann::json& raw(const std::string& key) const { return j_->at(key); }

  void allow(const std::set<std::string>& keys) const {
    if (!j_->is_object()) return;
    for (const auto& [k, v] : j_->items())
      if (!keys.count(k)) throw ValidationError("unknown field", at(k));
  }

  double number(const std::string& key, std::optional<double> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ValidationError("missing required field", at(key));
    }
    if (!raw(key).is_number()) throw ValidationError("expected a number", at(key));
    return raw(key).get<double>();
  }

  std::optional<double> optional_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ValidationError("missing required field", at(key));
    }
    const auto& v = raw(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    // Accept integral floats such as 1e5.
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    throw ValidationError("expected an integer", at(key));
  }

  std::int64_t positive(const std::string& key, std::optional<std::int64_t> fallback = {}) const {
    const auto v = integer(key, fallback);
    if (v < 1) throw ValidationError("must be at least 1", at(key));
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_boolean()) throw ValidationError("expected true or false", at(key));
    return raw(key).get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ValidationError("missing required field", at(key));
    }
    if (!raw(key).is_string()) throw ValidationError("expected a string", at(key));
    return raw(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ValidationError("missing required field", at(key));
    }
    const auto& a = raw(key);
    if (!a.is_array()) throw ValidationError("expected an array", at(key));
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) throw ValidationError("expected a number", at(key) + "/" + std::to_string(i));
      out.push_back(a[i].get<double>());
    }
    return out;
  }

  std::vector<std::int64_t> integers(const std::string& key, std::optional<std::vector<std::int64_t>> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ValidationError("missing required field", at(key));
    }
    const auto& a = raw(key);
    if (!a.is_array()) throw ValidationError("expected an array", at(key));
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number_integer()) throw ValidationError("expected an integer", at(key) + "/" + std::to_string(i));
      out.push_back(a[i].get<std::int64_t>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) const {
    if (!has(key)) return fallback;
    const auto& a = raw(key);
    if (!a.is_array()) throw ValidationError("expected an array", at(key));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_string()) throw ValidationError("expected a string", at(key) + "/" + std::to_string(i));
      out.push_back(a[i].get<std::string>());
    }
    return out;
  }

  Section child(const std::string& key) const {
    static const nlohmann::json empty = nlohmann::json::object();
    return has(key) ? Section(raw(key), at(key)) : Section(empty, at(key));
  }

 private:
  const nlohmann::json* j_;
  std::string path_;
};

/// {"type": "polynomial", "coeffs": [...]}, {"type": "piecewise_linear",
/// "knots": [...], "values": [...]} or {"type": "coboundary", "psi": {...},
/// "beta": b} for psi - psi o T_beta.
inline Component parse_component(const nlohmann::json& j, const std::string& path) {
  const Section s(j, path);
  if (j.is_null()) throw ValidationError("expected an object", path);
  const auto type = s.string("type");
  if (type == "polynomial") {
    s.allow({"type", "coeffs"});
    return polynomial(s.numbers("coeffs"));
  }
  if (type == "piecewise_linear") {
    s.allow({"type", "knots", "values"});
    try {
      return piecewise_linear(s.numbers("knots"), s.numbers("values"));
    } catch (const ValidationError& e) {
      if (!e.path().empty()) throw;
      throw ValidationError(e.what(), path);
    }
  }
  if (type == "coboundary") {
    s.allow({"type", "psi", "beta"});
    if (!s.has("psi")) throw ValidationError("missing required field", s.at("psi"));
    const double beta = s.number("beta");
    if (!(beta >= 0.0 && beta < 0.5)) throw ValidationError("beta must lie in [0, 1/2)", s.at("beta"));
    return coboundary(parse_component(s.raw("psi"), s.at("psi")), beta);
  }
  throw ValidationError("expected polynomial, piecewise_linear or coboundary", s.at("type"));
}

/// {"components": [...]}; absent means the scalar observable x - 1/2.
inline Observable parse_observable(const nlohmann::json& j, const std::string& path) {
  if (j.is_null()) return Observable::scalar(polynomial({-0.5, 1.0}));
  const Section s(j, path);
  s.allow({"components"});
  if (!s.has("components") || !s.raw("components").is_array() || s.raw("components").empty())
    throw ValidationError("expected a non-empty array", s.at("components"));
  std::vector<Component> comps;
  const auto& a = s.raw("components");
  for (std::size_t i = 0; i < a.size(); ++i) comps.push_back(parse_component(a[i], s.at("components") + "/" + std::to_string(i)));
  return Observable(std::move(comps));
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"simulate", "ulam", "decay",  "cone",   "blocks",   "clt",
                                                 "lil",      "lemmas", "embed", "params", "quenched", "split"};
  return names;
}

struct ExperimentConfig {
  nlohmann::json raw = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;

  Section root() const { return Section(raw, ""); }
  Section section(const std::string& name) const { return root().child(name); }
  bool has_schedule() const { return raw.contains("schedule"); }
  const nlohmann::json& schedule() const {
    if (!has_schedule()) throw ValidationError("missing required field", "/schedule");
    return raw.at("schedule");
  }
  Observable observable() const {
    return parse_observable(raw.contains("observable") ? raw.at("observable") : nlohmann::json(), "/observable");
  }
};

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object", "/");
  ExperimentConfig c;
  c.raw = j;
  const Section root(c.raw, "");
  std::set<std::string> allowed = {"$schema", "description", "seed", "workers", "schedule", "observable"};
  for (const auto& s : subcommands()) allowed.insert(s);
  root.allow(allowed);
  if (root.has("seed")) {
    const auto& s = root.raw("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw ValidationError("seed must be a non-negative integer", "/seed");
    c.seed = s.get<std::uint64_t>();
  }
  if (root.has("workers")) {
    const auto w = root.integer("workers");
    if (w < 0 || w > 4096) throw ValidationError("workers must lie in [0, 4096]", "/workers");
    c.workers = static_cast<unsigned>(w);
  }
  if (c.raw.contains("observable")) (void)c.observable();
  return c;
}

inline ExperimentConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot read config file " + file);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what(), "/");
  }
  return parse_config(j);
}

}  // namespace vasiplab::cli
