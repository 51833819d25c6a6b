#pragma once

#include <stdexcept>
#include <string>

namespace fosr {

// Bad or inconsistent user input (files, dimensions, configuration).
// CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown inside a sampler or solver (non-PD precision,
// rank collapse, non-finite state).  CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fosr
