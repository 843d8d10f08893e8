#pragma once

#include <stdexcept>
#include <string>

namespace climdown {

/// Failure category. Each maps to a process exit code in the CLI.
enum class ErrorKind { kValidation, kNumeric, kIo };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Ill-formed input: bad shapes, axes, calendars, configs.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kValidation, what) {}
};

/// NaN/Inf produced during a numeric computation.
class NumericFault : public Error {
 public:
  explicit NumericFault(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return 2;
    case ErrorKind::kNumeric: return 3;
    case ErrorKind::kIo: return 4;
  }
  return 1;
}

}  // namespace climdown
