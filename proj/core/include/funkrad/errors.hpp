#pragma once

#include <stdexcept>
#include <string>

namespace funkrad {

/// Rejected input: bad shapes, malformed files, out-of-contract parameters.
/// CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: non-finite values, failed solves, degenerate geometry
/// encountered mid-computation. CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace funkrad
