#pragma once

#include <stdexcept>
#include <string>

namespace hokme {

/// Bad input: violated precondition, malformed data, shape mismatch.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical breakdown: failed factorization, non-finite intermediate values.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace hokme
