#include "smcd/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "smcd/errors.hpp"

namespace smcd {

double sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw ContractViolation("mean of an empty sample");
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw ContractViolation("variance needs at least two values");
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double v : xs) s += (v - m) * (v - m);
  return s / static_cast<double>(xs.size() - 1);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y, bool robust, double level) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ContractViolation("fit_line: x and y differ in length");
  if (n < 3) throw ContractViolation("fit_line: need >= 3 grid points");
  const double mx = sample_mean(x);
  const double my = sample_mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractViolation("fit_line: x values are all equal");

  LinearFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double var_slope = 0.0;
  if (robust) {
    // HC3: sum_i (x_i - mx)^2 e_i^2 / (1 - h_i)^2 / sxx^2
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - fit.intercept - fit.slope * x[i];
      const double h = 1.0 / static_cast<double>(n) + (x[i] - mx) * (x[i] - mx) / sxx;
      const double u = e / (1.0 - h);
      var_slope += (x[i] - mx) * (x[i] - mx) * u * u;
    }
    var_slope /= sxx * sxx;
  } else {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - fit.intercept - fit.slope * x[i];
      sse += e * e;
    }
    var_slope = sse / static_cast<double>(n - 2) / sxx;
  }
  fit.slope_se = std::sqrt(var_slope);
  const boost::math::students_t dist(static_cast<double>(n - 2));
  const double q = boost::math::quantile(dist, 0.5 + 0.5 * level);
  fit.ci_low = fit.slope - q * fit.slope_se;
  fit.ci_high = fit.slope + q * fit.slope_se;
  return fit;
}

}  // namespace smcd
