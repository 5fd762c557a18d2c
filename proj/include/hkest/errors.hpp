#pragma once

#include <stdexcept>
#include <string>

namespace hkest {

/// Bad parameters or configuration. Maps to CLI exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Quadrature, eigensolver, refinement ladder or time stepper failed to
/// reach its tolerance. Maps to CLI exit code 3.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(const std::string& what, double achieved = 0.0)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// The eigenexpansion cannot reach the truncation tolerance at the requested
/// time with the modes available.
class InsufficientResolution : public ConvergenceFailure {
 public:
  InsufficientResolution(const std::string& what, double smallest_usable_t)
      : ConvergenceFailure(what, smallest_usable_t) {}
  double smallest_usable_t() const noexcept { return achieved(); }
};

}  // namespace hkest
