#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oscchain {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPotential : public Error {
 public:
  using Error::Error;
};

class InvalidCoefficients : public Error {
 public:
  using Error::Error;
};

/// Rejection sampler could not maintain a usable acceptance rate.
class EnvelopeFailure : public Error {
 public:
  using Error::Error;
};

/// Quadrature or other numerical procedure failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value appeared in an evolving state.
class BlowUp : public NumericError {
 public:
  BlowUp(const std::string& what, std::size_t index)
      : NumericError(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Numerical failure inside one replica of an ensemble.
class ReplicaError : public NumericError {
 public:
  ReplicaError(const std::string& what, std::size_t replica)
      : NumericError("replica " + std::to_string(replica) + ": " + what), replica_(replica) {}
  std::size_t replica() const noexcept { return replica_; }

 private:
  std::size_t replica_;
};

/// A moving test-function window left the periodic box.
class FrameWrap : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Too few snapshots to resolve a time integral.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// File system failure while reading or writing artifacts.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A result table lacks an expected column or is malformed.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field = {}, long line = -1)
      : Error(format(what, field, line)), field_(std::move(field)), line_(line) {}
  const std::string& field() const noexcept { return field_; }
  long line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& what, const std::string& field, long line) {
    std::string msg = "config error";
    if (line >= 0) msg += " at line " + std::to_string(line);
    if (!field.empty()) msg += " [" + field + "]";
    return msg + ": " + what;
  }
  std::string field_;
  long line_;
};

}  // namespace oscchain
