#pragma once

#include <span>

namespace hkest {

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  double rms_residual = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Log-spaced samples on [lo, hi], both ends included.
void log_space(double lo, double hi, std::span<double> out);

}  // namespace hkest
