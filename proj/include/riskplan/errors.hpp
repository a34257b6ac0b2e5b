#pragma once

#include <stdexcept>
#include <string>

namespace riskplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, scenario or solver input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The GP covariance matrix could not be Cholesky-factorized.
class SingularKernel : public Error {
 public:
  using Error::Error;
};

/// A limb Jacobian is rank deficient or too badly conditioned to invert.
class SingularJacobian : public Error {
 public:
  using Error::Error;
};

/// A zero violation probability was requested; the quantile 1 - 0 is unbounded.
class ZeroRisk : public Error {
 public:
  using Error::Error;
};

/// No wall deflection satisfies the deflection bound.
class DeflectionBoundExceeded : public Error {
 public:
  DeflectionBoundExceeded(const std::string& what, int instant, int limb, double norm)
      : Error(what), instant_(instant), limb_(limb), norm_(norm) {}

  int instant() const { return instant_; }
  int limb() const { return limb_; }
  double norm() const { return norm_; }

 private:
  int instant_;
  int limb_;
  double norm_;
};

/// Malformed dataset file; carries the 1-based line number.
class DatasetError : public Error {
 public:
  DatasetError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Scenario configuration failed schema validation; carries the key path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key_path, const std::string& what)
      : Error(key_path + ": " + what), key_path_(key_path) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

}  // namespace riskplan
