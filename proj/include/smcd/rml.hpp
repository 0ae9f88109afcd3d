#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smcd/errors.hpp"
#include "smcd/fderiv.hpp"
#include "smcd/model.hpp"

namespace smcd {

/// Step sizes gamma_n for recursive estimation.
///   constant:g             gamma_n = g (g >= 0; g = 0 freezes theta)
///   flat-decay:g0,n0,c,e   gamma_n = g0 for n <= n0, (n - c)^(-e) afterwards
///   table:g0,g1,...        gamma_n = g_n, last entry repeated
class StepSizeSchedule {
 public:
  enum class Kind { constant, flat_then_decay, table };

  static StepSizeSchedule constant(double gamma);
  static StepSizeSchedule flat_then_decay(double gamma0, double flat_until, double offset, double exponent);
  static StepSizeSchedule table(std::vector<double> values);
  static StepSizeSchedule parse(std::string_view text);

  /// The step size used when processing observation y_n.
  double operator()(std::size_t n) const;
  std::string to_string() const;
  Kind kind() const noexcept { return kind_; }
  /// True for schedules with sum gamma = inf and sum gamma^2 < inf.
  bool satisfies_robbins_monro() const noexcept;

 private:
  Kind kind_ = Kind::constant;
  std::vector<double> params_;
};

/// Estimate of grad log p(y_n | y_{0:n-1}) from the predictive cloud at time n
/// and a score table (T̄ or path scores):
///   [eta_n^N(grad g) + zeta_n^N(g)] / eta_n^N(g),
/// computed with max-subtracted weights w_i = g(y_n|X^{(i)}) / max_j g(y_n|X^{(j)}).
template <StateSpaceModel M>
std::vector<double> score_increment_estimate(const M& model, const ParticleCloud<typename M::State>& cloud,
                                             const Matrix& table, const typename M::Obs& y) {
  const std::size_t n = cloud.size();
  const std::size_t d = model.dim();
  if (table.rows() != n || table.cols() != d)
    throw ContractViolation("score_increment_estimate: table shape does not match cloud and model");
  std::vector<double> lg(n);
  double mx = -HUGE_VAL;
  for (std::size_t i = 0; i < n; ++i) {
    lg[i] = model.log_observation(y, cloud.particles[i]);
    if (std::isnan(lg[i])) throw LikelihoodCollapse(cloud.time);
    mx = std::max(mx, lg[i]);
  }
  if (!(mx > -HUGE_VAL) || !std::isfinite(mx)) throw LikelihoodCollapse(cloud.time);

  const auto mean = table.column_means();
  std::vector<double> num(d, 0.0);
  std::vector<double> grad(d);
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(lg[i] - mx);
    if (w == 0.0) continue;
    den += w;
    model.grad_log_observation(y, cloud.particles[i], grad);
    for (std::size_t r = 0; r < d; ++r) num[r] += w * (grad[r] + table(i, r) - mean[r]);
  }
  for (auto& v : num) {
    v /= den;
    if (!std::isfinite(v)) throw DomainError("score increment estimate is not finite");
  }
  return num;
}

template <StateSpaceModel M>
std::vector<double> rml_increment(const DerivativeFilter<M>& filter, const M& model,
                                  const typename M::Obs& y) {
  return score_increment_estimate(model, filter.cloud(), filter.table(), y);
}

/// Anything that tracks the filter and its derivative online: advance(model,
/// y_prev) moves from n-1 to n, and rml_increment gives grad log p(y_n|y_{0:n-1}).
template <class F, class M>
concept OnlineDerivativeFilter = StateSpaceModel<M> && requires(F& f, const F& cf, const M& m,
                                                                const typename M::Obs& y) {
  f.advance(m, y);
  { rml_increment(cf, m, y) } -> std::convertible_to<std::vector<double>>;
};

/// Recursive ML state: the current parameter (carried by `model`), the filter
/// built with past parameters, and bookkeeping.
template <StateSpaceModel M, class Filter = DerivativeFilter<M>>
struct RmlState {
  M model;
  Filter filter;
  ThetaBox box;
  std::size_t n = 0;  // observations consumed so far
  std::optional<typename M::Obs> last_obs;
  std::size_t clamp_events = 0;
};

struct RmlStepRecord {
  std::size_t n = 0;
  std::vector<double> theta;  // after the update
  std::vector<double> increment;
  double increment_norm = 0.0;
  double gamma = 0.0;
  bool clamped = false;
};

template <StateSpaceModel M>
RmlState<M> rml_init(const M& model_at_theta0, Estimator estimator, std::size_t num_particles,
                     std::uint64_t seed, std::optional<ThetaBox> box = std::nullopt) {
  return RmlState<M>{model_at_theta0, DerivativeFilter<M>(estimator, model_at_theta0, num_particles, seed),
                     box ? *box : model_at_theta0.default_box(), 0, std::nullopt, 0};
}

/// Processes y_n: advances the filter to time n with theta_{n-1} (skipped for
/// n = 0), estimates the score increment at theta_{n-1}, then sets
/// theta_n = clamp(theta_{n-1} + gamma_n * increment).
template <StateSpaceModel M, class Filter>
  requires OnlineDerivativeFilter<Filter, M>
RmlStepRecord rml_step(RmlState<M, Filter>& state, const typename M::Obs& y, const StepSizeSchedule& schedule) {
  if (state.last_obs) state.filter.advance(state.model, *state.last_obs);
  RmlStepRecord rec;
  rec.n = state.n;
  rec.increment = rml_increment(state.filter, state.model, y);
  rec.gamma = schedule(state.n);
  double norm2 = 0.0;
  for (double v : rec.increment) norm2 += v * v;
  rec.increment_norm = std::sqrt(norm2);

  Theta next = state.model.theta();
  for (std::size_t r = 0; r < next.size(); ++r) next[r] += rec.gamma * rec.increment[r];
  rec.clamped = state.box.clamp(next);
  if (rec.clamped) ++state.clamp_events;
  if (rec.gamma != 0.0) state.model = state.model.with_theta(next);
  rec.theta = state.model.theta().values;
  state.last_obs = y;
  ++state.n;
  return rec;
}

/// Per-step increments and their sum, the batch gradient of log p(y_{0:T}) at a
/// fixed theta, from one pass of the filter through the record.
struct OfflineGradient {
  std::vector<double> gradient;
  std::vector<std::vector<double>> increments;
};

template <StateSpaceModel M>
OfflineGradient offline_gradient(const M& model, std::span<const typename M::Obs> ys,
                                 std::size_t num_particles, std::uint64_t seed,
                                 Estimator estimator = Estimator::backward_kernel) {
  if (ys.empty()) throw ContractViolation("offline_gradient needs at least one observation");
  DerivativeFilter<M> filter(estimator, model, num_particles, seed);
  OfflineGradient out;
  out.gradient.assign(model.dim(), 0.0);
  for (std::size_t n = 0; n < ys.size(); ++n) {
    if (n > 0) filter.advance(model, ys[n - 1]);
    auto inc = rml_increment(filter, model, ys[n]);
    for (std::size_t r = 0; r < inc.size(); ++r) out.gradient[r] += inc[r];
    out.increments.push_back(std::move(inc));
  }
  return out;
}

}  // namespace smcd
