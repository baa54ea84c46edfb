#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fnode {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared while stepping, rolling out or training.
/// `index()` is the step (or epoch) at which it was detected.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t index)
      : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Saddle-point matrix of a constrained system is numerically singular.
class SingularConfiguration : public Error {
 public:
  using Error::Error;
};

/// Closed-form assembly of a mechanism is impossible for the requested angle.
class KinematicLock : public Error {
 public:
  using Error::Error;
};

/// Constraint projection did not reach tolerance.
class DriftError : public Error {
 public:
  DriftError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Ill-conditioned Riccati recursion.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// Closed-loop plant left the admissible region.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Malformed data file. `line()` is 1-based; 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  /// Prefixes `context` (for example a file name) and keeps the line number.
  ParseError(const std::string& context, const ParseError& inner)
      : Error(context + ": " + inner.what()), line_(inner.line_) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid run configuration. `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace fnode
