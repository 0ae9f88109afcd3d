#include "smcd/gaussian_models.hpp"

#include <cmath>

namespace smcd {

namespace {

void check_ar1(const Theta& theta, const char* what) {
  if (theta.size() != 3) throw DomainError(std::string(what) + " takes a 3-dimensional theta");
  if (!(std::abs(theta[0]) < 1.0)) throw DomainError(std::string(what) + ": |theta[0]| must be < 1");
  if (!(theta[1] > 0.0)) throw DomainError(std::string(what) + ": theta[1] must be > 0");
  if (!(theta[2] > 0.0)) throw DomainError(std::string(what) + ": theta[2] must be > 0");
}

Theta labelled(const Theta& theta, std::vector<std::string> names) {
  return Theta(theta.values, std::move(names));
}

ThetaBox ar1_box() { return {{-0.999, 1e-4, 1e-4}, {0.999, 1e4, 1e4}}; }

}  // namespace

LinearGaussianModel::LinearGaussianModel(const Theta& theta) {
  check_ar1(theta, "linear-Gaussian model");
  theta_ = labelled(theta, {"a", "sigma_v", "sigma_w"});
  ar_ = detail::Ar1Prior(theta[0], theta[1]);
  sw_ = theta[2];
  inv_sw2_ = 1.0 / (sw_ * sw_);
  log_norm_obs_ = -0.5 * (detail::kLogTwoPi + std::log(sw_ * sw_));
}

ThetaBox LinearGaussianModel::default_box() const { return ar1_box(); }

StochasticVolatilityModel::StochasticVolatilityModel(const Theta& theta) {
  check_ar1(theta, "stochastic volatility model");
  theta_ = labelled(theta, {"phi", "sigma", "beta"});
  ar_ = detail::Ar1Prior(theta[0], theta[1]);
  beta_ = theta[2];
  inv_beta2_ = 1.0 / (beta_ * beta_);
  log_norm_obs_ = -0.5 * (detail::kLogTwoPi + std::log(beta_ * beta_));
}

ThetaBox StochasticVolatilityModel::default_box() const { return ar1_box(); }

}  // namespace smcd
