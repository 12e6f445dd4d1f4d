#pragma once

#include <stdexcept>
#include <string>

namespace ndop {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-parsable class name used by the CLI for its one-line diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Argument outside an operation's precondition (bad order, empty input...).
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("InvalidArgument", what) {}
};

/// Two operands disagree in grid, channel count, length or time stamps.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("ShapeError", what) {}
};

/// NaN/Inf in an input or intermediate that must be finite.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("NumericError", what) {}
};

/// A time integration produced a non-finite (or out-of-bound) state.
class BlowUpError : public Error {
 public:
  BlowUpError(double time, const std::string& what)
      : Error("BlowUpError", what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("IoError", what) {}
};

/// Invalid or incomplete experiment configuration. `key()` names the
/// offending entry (dotted path).
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("ConfigError", what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace ndop
