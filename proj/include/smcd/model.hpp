#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "smcd/errors.hpp"
#include "smcd/rng.hpp"
#include "smcd/theta.hpp"

namespace smcd {

/// A state-space model bound to one parameter value. Densities are logs with
/// respect to the model's dominating measure; gradients are with respect to
/// theta and are written (not accumulated) into `out`, which has dim() slots.
template <class M>
concept StateSpaceModel = requires(const M& m, const typename M::State& x,
                                   const typename M::Obs& y, std::span<double> out,
                                   Rng& rng, const Theta& theta) {
  typename M::State;
  typename M::Obs;
  { m.dim() } -> std::convertible_to<std::size_t>;
  { m.theta() } -> std::convertible_to<const Theta&>;
  { m.with_theta(theta) } -> std::same_as<M>;
  { m.default_box() } -> std::convertible_to<ThetaBox>;
  { m.log_initial(x) } -> std::convertible_to<double>;
  { m.log_transition(x, x) } -> std::convertible_to<double>;
  { m.log_observation(y, x) } -> std::convertible_to<double>;
  m.grad_log_initial(x, out);
  m.grad_log_transition(x, x, out);
  m.grad_log_observation(y, x, out);
  { m.sample_initial(rng) } -> std::convertible_to<typename M::State>;
  { m.sample_transition(x, rng) } -> std::convertible_to<typename M::State>;
  { m.sample_observation(x, rng) } -> std::convertible_to<typename M::Obs>;
};

namespace detail {

inline void require_positive_density(double logd, const char* which) {
  if (!(logd > -HUGE_VAL) || std::isnan(logd))
    throw DomainError(std::string(which) + " density is zero or undefined at the evaluation point");
}

inline void require_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw DomainError("score increment is not finite");
}

}  // namespace detail

/// t_0(x_0) = grad log pi(x_0).
template <StateSpaceModel M>
std::vector<double> score_increment(const M& model, const typename M::State& x_cur) {
  detail::require_positive_density(model.log_initial(x_cur), "initial");
  std::vector<double> t(model.dim());
  model.grad_log_initial(x_cur, t);
  detail::require_finite(t);
  return t;
}

/// t_k(x_{k-1}, x_k) = grad log g(y_{k-1}|x_{k-1}) + grad log f(x_k|x_{k-1}), k > 0.
template <StateSpaceModel M>
std::vector<double> score_increment(const M& model, const typename M::Obs& y_prev,
                                    const typename M::State& x_prev,
                                    const typename M::State& x_cur) {
  detail::require_positive_density(model.log_observation(y_prev, x_prev), "observation");
  detail::require_positive_density(model.log_transition(x_prev, x_cur), "transition");
  std::vector<double> t(model.dim());
  std::vector<double> tmp(model.dim());
  model.grad_log_observation(y_prev, x_prev, t);
  model.grad_log_transition(x_prev, x_cur, tmp);
  for (std::size_t r = 0; r < t.size(); ++r) t[r] += tmp[r];
  detail::require_finite(t);
  return t;
}

}  // namespace smcd
