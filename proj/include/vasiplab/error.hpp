#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vasiplab {

/// Argument outside the mathematical domain of an operation (e.g. x outside [0,1]).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed specification or configuration. `path()` names the offending field
/// in JSON-pointer style ("/schedule/betas/1") when the error comes from a document.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what, std::string path = {})
      : std::invalid_argument(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a usable answer (non-convergence,
/// failed search, too few samples).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constructive search found no admissible candidate. `best` describes the
/// closest candidate so callers can report it.
class SearchFailure : public NumericalError {
 public:
  SearchFailure(const std::string& what, std::string best) : NumericalError(what + " (best: " + best + ")"), best_(std::move(best)) {}

  const std::string& best() const noexcept { return best_; }

 private:
  std::string best_;
};

}  // namespace vasiplab
