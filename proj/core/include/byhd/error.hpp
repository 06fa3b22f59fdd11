#pragma once

#include <stdexcept>
#include <string>

namespace byhd {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not satisfy an operation's shape contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid block or run configuration (bad channel split, unknown key, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition (non-scalar loss, missing gradient, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong state (e.g. backward twice on one tape).
class StateError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Container or checkpoint with a bad magic or unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Container whose payload is truncated or inconsistent.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Text input that cannot be tokenized.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Text input that parses but holds out-of-range values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace byhd
