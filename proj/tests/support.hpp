#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "smcd/finite_hmm.hpp"
#include "smcd/gaussian_models.hpp"
#include "smcd/model.hpp"
#include "smcd/rng.hpp"

namespace smcd::test {

inline constexpr double kFdStep = 1e-6;

/// Central difference of f along every coordinate of theta.
inline std::vector<double> central_difference(const std::function<double(const Theta&)>& f, const Theta& theta,
                                              double h = kFdStep) {
  std::vector<double> g(theta.size());
  for (std::size_t r = 0; r < theta.size(); ++r) {
    Theta up = theta, down = theta;
    up[r] += h;
    down[r] -= h;
    g[r] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

/// |a - b| / max(|b|, 1): relative error, absolute near zero.
inline double rel_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1.0); }

inline double max_rel_error(std::span<const double> a, std::span<const double> b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, rel_error(a[i], b[i]));
  return e;
}

/// Finite HMM whose initial, transition and emission logits all depend on a
/// d-dimensional theta through random coefficients.
inline FiniteHmm random_affine_hmm(std::size_t k, std::size_t m, std::size_t d, std::uint64_t seed,
                                   const std::vector<double>& theta) {
  auto s = constant_hmm_structure(k, m, d);
  Rng rng(seed);
  for (AffineLogits* t : {&s->initial, &s->transition, &s->emission}) {
    for (auto& b : t->base) b = rng.normal();
    for (auto& c : t->coef)
      for (auto& v : c) v = 0.7 * rng.normal();
  }
  return FiniteHmm(s, Theta(theta, {}));
}

/// Adds theta-independent constants to every log-density of M.
template <StateSpaceModel M>
class ShiftedModel {
 public:
  using State = typename M::State;
  using Obs = typename M::Obs;

  ShiftedModel(M inner, double c0, double c1, double c2) : m_(std::move(inner)), c_{c0, c1, c2} {}

  std::size_t dim() const { return m_.dim(); }
  const Theta& theta() const { return m_.theta(); }
  ShiftedModel with_theta(const Theta& t) const { return ShiftedModel(m_.with_theta(t), c_[0], c_[1], c_[2]); }
  ThetaBox default_box() const { return m_.default_box(); }
  double log_initial(const State& x) const { return m_.log_initial(x) + c_[0]; }
  double log_transition(const State& p, const State& x) const { return m_.log_transition(p, x) + c_[1]; }
  double log_observation(const Obs& y, const State& x) const { return m_.log_observation(y, x) + c_[2]; }
  void grad_log_initial(const State& x, std::span<double> o) const { m_.grad_log_initial(x, o); }
  void grad_log_transition(const State& p, const State& x, std::span<double> o) const {
    m_.grad_log_transition(p, x, o);
  }
  void grad_log_observation(const Obs& y, const State& x, std::span<double> o) const {
    m_.grad_log_observation(y, x, o);
  }
  State sample_initial(Rng& r) const { return m_.sample_initial(r); }
  State sample_transition(const State& p, Rng& r) const { return m_.sample_transition(p, r); }
  Obs sample_observation(const State& x, Rng& r) const { return m_.sample_observation(x, r); }

 private:
  M m_;
  double c_[3];
};

/// Finite HMM whose emission of symbol `dead` has probability zero.
class DeadSymbolHmm {
 public:
  using State = int;
  using Obs = int;

  DeadSymbolHmm(FiniteHmm inner, int dead) : m_(std::move(inner)), dead_(dead) {}

  std::size_t dim() const { return m_.dim(); }
  const Theta& theta() const { return m_.theta(); }
  DeadSymbolHmm with_theta(const Theta& t) const { return DeadSymbolHmm(m_.with_theta(t), dead_); }
  ThetaBox default_box() const { return m_.default_box(); }
  double log_initial(int x) const { return m_.log_initial(x); }
  double log_transition(int p, int x) const { return m_.log_transition(p, x); }
  double log_observation(int y, int x) const { return y == dead_ ? -HUGE_VAL : m_.log_observation(y, x); }
  void grad_log_initial(int x, std::span<double> o) const { m_.grad_log_initial(x, o); }
  void grad_log_transition(int p, int x, std::span<double> o) const { m_.grad_log_transition(p, x, o); }
  void grad_log_observation(int y, int x, std::span<double> o) const { m_.grad_log_observation(y, x, o); }
  int sample_initial(Rng& r) const { return m_.sample_initial(r); }
  int sample_transition(int p, Rng& r) const { return m_.sample_transition(p, r); }
  int sample_observation(int x, Rng& r) const { return m_.sample_observation(x, r); }

 private:
  FiniteHmm m_;
  int dead_;
};

template <StateSpaceModel M>
struct GradientPoint {
  Theta theta;
  typename M::State x_prev;
  typename M::State x;
  typename M::Obs y;
};

/// Largest relative error between the analytic grad_log_* and central
/// differences of the log-densities, over `count` random points.
template <StateSpaceModel M, class Gen>
double max_gradient_error(const M& proto, Gen&& gen, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  std::vector<double> an(proto.dim());
  for (std::size_t k = 0; k < count; ++k) {
    const GradientPoint<M> p = gen(rng);
    const M m = proto.with_theta(p.theta);
    auto at = [&](const Theta& t) { return proto.with_theta(t); };

    m.grad_log_initial(p.x, an);
    worst = std::max(worst, max_rel_error(an, central_difference([&](const Theta& t) { return at(t).log_initial(p.x); }, p.theta)));
    m.grad_log_transition(p.x_prev, p.x, an);
    worst = std::max(worst, max_rel_error(an, central_difference([&](const Theta& t) { return at(t).log_transition(p.x_prev, p.x); }, p.theta)));
    m.grad_log_observation(p.y, p.x, an);
    worst = std::max(worst, max_rel_error(an, central_difference([&](const Theta& t) { return at(t).log_observation(p.y, p.x); }, p.theta)));
  }
  return worst;
}

/// Random points for the three models, theta drawn inside each domain.
inline GradientPoint<LinearGaussianModel> lgssm_point(Rng& rng) {
  const Theta t({-0.95 + 1.9 * rng.uniform(), 0.2 + 1.8 * rng.uniform(), 0.2 + 1.8 * rng.uniform()}, {});
  const auto m = make_lgssm(t);
  const double xp = m.sample_initial(rng);
  const double x = m.sample_transition(xp, rng);
  return {t, xp, x, m.sample_observation(x, rng)};
}

inline GradientPoint<StochasticVolatilityModel> sv_point(Rng& rng) {
  const Theta t({-0.95 + 1.9 * rng.uniform(), 0.1 + 0.9 * rng.uniform(), 0.3 + 1.7 * rng.uniform()}, {});
  const auto m = make_sv(t);
  const double xp = m.sample_initial(rng);
  const double x = m.sample_transition(xp, rng);
  return {t, xp, x, m.sample_observation(x, rng)};
}

/// K=4, M=3, d=3 with every table depending on theta.
inline GradientPoint<FiniteHmm> hmm_point(Rng& rng) {
  const Theta t({-2.0 + 4.0 * rng.uniform(), -2.0 + 4.0 * rng.uniform(), -2.0 + 4.0 * rng.uniform()}, {});
  return {t, static_cast<int>(rng() % 4), static_cast<int>(rng() % 4), static_cast<int>(rng() % 3)};
}

}  // namespace smcd::test
