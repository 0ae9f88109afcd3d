#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "smcd/model.hpp"

namespace smcd {

namespace detail {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

/// Stationary AR(1) prior and transition shared by both scalar Gaussian
/// models: X_0 ~ N(0, s^2/(1-a^2)), X_{n+1} = a X_n + s V.
/// Gradient slots 0 and 1 are (a, s).
struct Ar1Prior {
  double a = 0.0;
  double s = 1.0;
  double var0 = 1.0;
  double inv_s = 1.0;
  double inv_s2 = 1.0;
  double log_norm_trans = 0.0;  // -0.5 log(2 pi s^2)
  double log_norm_init = 0.0;   // -0.5 log(2 pi var0)

  Ar1Prior() = default;
  Ar1Prior(double a_, double s_)
      : a(a_),
        s(s_),
        var0(s_ * s_ / (1.0 - a_ * a_)),
        inv_s(1.0 / s_),
        inv_s2(1.0 / (s_ * s_)),
        log_norm_trans(-0.5 * (kLogTwoPi + std::log(s_ * s_))),
        log_norm_init(-0.5 * (kLogTwoPi + std::log(s_ * s_ / (1.0 - a_ * a_)))) {}

  double log_initial(double x) const { return log_norm_init - 0.5 * x * x / var0; }
  double log_transition(double prev, double x) const {
    const double r = x - a * prev;
    return log_norm_trans - 0.5 * r * r * inv_s2;
  }
  void grad_log_initial(double x, std::span<double> out) const {
    // d/dvar0 of the N(0, var0) log-density, chained through var0(a, s).
    const double dv = -0.5 / var0 + 0.5 * x * x / (var0 * var0);
    const double one_m = 1.0 - a * a;
    out[0] = dv * s * s * 2.0 * a / (one_m * one_m);
    out[1] = dv * 2.0 * s / one_m;
  }
  void grad_log_transition(double prev, double x, std::span<double> out) const {
    const double r = x - a * prev;
    out[0] = r * prev * inv_s2;
    out[1] = (r * r * inv_s2 - 1.0) * inv_s;
  }
};

}  // namespace detail

/// Scalar linear-Gaussian model, theta = (a, sigma_v, sigma_w):
/// X_0 ~ N(0, sigma_v^2/(1-a^2)), X_{n+1} = a X_n + sigma_v V, Y_n = X_n + sigma_w W.
class LinearGaussianModel {
 public:
  using State = double;
  using Obs = double;

  explicit LinearGaussianModel(const Theta& theta);

  std::size_t dim() const noexcept { return 3; }
  const Theta& theta() const noexcept { return theta_; }
  LinearGaussianModel with_theta(const Theta& theta) const { return LinearGaussianModel(theta); }
  ThetaBox default_box() const;

  double a() const noexcept { return ar_.a; }
  double sigma_v() const noexcept { return ar_.s; }
  double sigma_w() const noexcept { return sw_; }
  double initial_variance() const noexcept { return ar_.var0; }

  double log_initial(double x) const { return ar_.log_initial(x); }
  double log_transition(double prev, double x) const { return ar_.log_transition(prev, x); }
  double log_observation(double y, double x) const {
    const double r = y - x;
    return log_norm_obs_ - 0.5 * r * r * inv_sw2_;
  }

  void grad_log_initial(double x, std::span<double> out) const {
    ar_.grad_log_initial(x, out);
    out[2] = 0.0;
  }
  void grad_log_transition(double prev, double x, std::span<double> out) const {
    ar_.grad_log_transition(prev, x, out);
    out[2] = 0.0;
  }
  void grad_log_observation(double y, double x, std::span<double> out) const {
    const double r = y - x;
    out[0] = 0.0;
    out[1] = 0.0;
    out[2] = (r * r * inv_sw2_ - 1.0) / sw_;
  }

  double sample_initial(Rng& rng) const { return std::sqrt(ar_.var0) * rng.normal(); }
  double sample_transition(double prev, Rng& rng) const { return ar_.a * prev + ar_.s * rng.normal(); }
  double sample_observation(double x, Rng& rng) const { return x + sw_ * rng.normal(); }

 private:
  Theta theta_;
  detail::Ar1Prior ar_;
  double sw_ = 1.0;
  double inv_sw2_ = 1.0;
  double log_norm_obs_ = 0.0;
};

/// Stochastic volatility model, theta = (phi, sigma, beta):
/// X_0 ~ N(0, sigma^2/(1-phi^2)), X_{n+1} = phi X_n + sigma V,
/// Y_n = beta exp(X_n / 2) W, i.e. g(y|x) is the N(0, beta^2 e^x) density.
class StochasticVolatilityModel {
 public:
  using State = double;
  using Obs = double;

  explicit StochasticVolatilityModel(const Theta& theta);

  std::size_t dim() const noexcept { return 3; }
  const Theta& theta() const noexcept { return theta_; }
  StochasticVolatilityModel with_theta(const Theta& theta) const {
    return StochasticVolatilityModel(theta);
  }
  ThetaBox default_box() const;

  double phi() const noexcept { return ar_.a; }
  double sigma() const noexcept { return ar_.s; }
  double beta() const noexcept { return beta_; }
  double initial_variance() const noexcept { return ar_.var0; }

  double log_initial(double x) const { return ar_.log_initial(x); }
  double log_transition(double prev, double x) const { return ar_.log_transition(prev, x); }
  double log_observation(double y, double x) const {
    return log_norm_obs_ - 0.5 * x - 0.5 * y * y * inv_beta2_ * std::exp(-x);
  }

  void grad_log_initial(double x, std::span<double> out) const {
    ar_.grad_log_initial(x, out);
    out[2] = 0.0;
  }
  void grad_log_transition(double prev, double x, std::span<double> out) const {
    ar_.grad_log_transition(prev, x, out);
    out[2] = 0.0;
  }
  void grad_log_observation(double y, double x, std::span<double> out) const {
    out[0] = 0.0;
    out[1] = 0.0;
    out[2] = (y * y * inv_beta2_ * std::exp(-x) - 1.0) / beta_;
  }

  double sample_initial(Rng& rng) const { return std::sqrt(ar_.var0) * rng.normal(); }
  double sample_transition(double prev, Rng& rng) const { return ar_.a * prev + ar_.s * rng.normal(); }
  double sample_observation(double x, Rng& rng) const {
    return beta_ * std::exp(0.5 * x) * rng.normal();
  }

 private:
  Theta theta_;
  detail::Ar1Prior ar_;
  double beta_ = 1.0;
  double inv_beta2_ = 1.0;
  double log_norm_obs_ = 0.0;  // -0.5 log(2 pi beta^2)
};

inline LinearGaussianModel make_lgssm(const Theta& theta) { return LinearGaussianModel(theta); }
inline StochasticVolatilityModel make_sv(const Theta& theta) { return StochasticVolatilityModel(theta); }

}  // namespace smcd
