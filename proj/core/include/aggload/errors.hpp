#pragma once

#include <stdexcept>
#include <string>

namespace aggload {

// Bad user-supplied input: malformed files, inconsistent shapes, out-of-range
// values.  The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure during estimation: non-positive-definite covariance,
// singular normal equations, and the like.  The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aggload
