#pragma once

#include <stdexcept>
#include <string>

namespace pvtrade {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed or invariant-violating input data. `row()` is 1-based over data
/// rows (header excluded), or 0 when the failure is not tied to a row.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t row = 0);
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Not enough history to evaluate rolling statistics.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong environment phase (e.g. step after done).
class LifecycleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training aborted, typically on a non-finite gradient.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace pvtrade
