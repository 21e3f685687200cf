#pragma once

#include <stdexcept>
#include <string>

namespace survkit {

/// Bad inputs: files, schemas, preconditions. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failures: singular matrices, diverging fits, NaN losses. CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace survkit
