#pragma once

#include <stdexcept>
#include <string>

namespace txn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on tensor shapes or call arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (bad architecture, negative weights, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, or an optimization diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, inconsistent header, wrong mode).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File ended before the declared payload was read.
class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Failure opening or writing a file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Texture-mode parameters used where style mode is required, or vice versa.
class ModeError : public Error {
 public:
  using Error::Error;
};

}  // namespace txn
