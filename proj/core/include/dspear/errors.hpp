#pragma once

#include <stdexcept>
#include <string>

namespace dspear {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kNumeric = 3,
  kIo = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kNumeric; }
};

/// Invalid hyperparameter, unknown config key, bad variant tag.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// NaN/Inf encountered in a loss, gradient, target or priority.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Tensor/vector dimensions that do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation called out of order (e.g. backward without a forward tape).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Not enough stored transitions / candidates for the requested draw.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

}  // namespace dspear
