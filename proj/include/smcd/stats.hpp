#pragma once

#include <cstddef>
#include <span>

namespace smcd {

double sample_mean(std::span<const double> xs);
/// Unbiased (n - 1) sample variance.
double sample_variance(std::span<const double> xs);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points = 0;

  bool ci_contains_zero() const noexcept { return ci_low <= 0.0 && 0.0 <= ci_high; }
};

/// Ordinary least squares y = a + b x. The slope standard error is the HC3
/// heteroskedasticity-robust one when `robust`, the classical one otherwise;
/// the interval uses the Student-t quantile with points - 2 degrees of freedom.
LinearFit fit_line(std::span<const double> x, std::span<const double> y, bool robust, double level = 0.95);

}  // namespace smcd
