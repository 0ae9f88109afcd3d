#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "smcd/errors.hpp"
#include "smcd/fderiv.hpp"
#include "smcd/finite_hmm.hpp"
#include "smcd/model.hpp"
#include "smcd/rml.hpp"
#include "smcd/rng.hpp"
#include "smcd/stats.hpp"
#include "smcd/test_functions.hpp"

namespace smcd {

template <StateSpaceModel M>
struct SimulatedRecord {
  std::vector<typename M::State> states;
  std::vector<typename M::Obs> observations;
};

/// X_{0:T-1} and Y_{0:T-1} drawn from the model with a single seed.
template <StateSpaceModel M>
SimulatedRecord<M> simulate(const M& model, std::size_t length, std::uint64_t seed) {
  SimulatedRecord<M> rec;
  rec.states.reserve(length);
  rec.observations.reserve(length);
  Rng rng(seed);
  for (std::size_t n = 0; n < length; ++n) {
    rec.states.push_back(n == 0 ? model.sample_initial(rng) : model.sample_transition(rec.states.back(), rng));
    rec.observations.push_back(model.sample_observation(rec.states.back(), rng));
  }
  return rec;
}

/// Seed of replication `index` in a study seeded with `seed`.
inline std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t index) {
  Rng r = Rng(seed).substream(index);
  return r();
}

/// Failures that flag a replication instead of aborting a study.
template <class Fn>
bool run_flagged(Fn&& fn) {
  try {
    fn();
    return true;
  } catch (const WeightCollapse&) {
  } catch (const DegenerateBackwardRow&) {
  } catch (const LikelihoodCollapse&) {
  }
  return false;
}

/// Sum of score-increment estimates over k = n..n+L-1 at the model's fixed
/// theta: the particle estimate of grad log p(y_{n:n+L-1} | y_{0:n-1}).
template <StateSpaceModel M>
std::vector<double> block_score(const M& model, std::span<const typename M::Obs> ys, std::size_t n,
                                std::size_t block_length, std::size_t num_particles, std::uint64_t seed,
                                Estimator estimator) {
  if (block_length < 1) throw ContractViolation("block length must be at least 1");
  if (n + block_length > ys.size()) throw ContractViolation("block extends past the observation record");
  DerivativeFilter<M> filter(estimator, model, num_particles, seed);
  std::vector<double> sum(model.dim(), 0.0);
  for (std::size_t k = 0; k < n + block_length; ++k) {
    if (k > 0) filter.advance(model, ys[k - 1]);
    if (k < n) continue;
    const auto inc = rml_increment(filter, model, ys[k]);
    for (std::size_t r = 0; r < sum.size(); ++r) sum[r] += inc[r];
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Variance of block scores against time.

struct VarianceStudyConfig {
  Estimator estimator = Estimator::backward_kernel;
  std::size_t num_particles = 200;
  std::size_t block_length = 50;
  std::vector<std::size_t> grid{0, 100, 200, 300, 400, 500};
  std::size_t replications = 100;
  std::uint64_t seed = 1;
};

struct VariancePoint {
  std::size_t n = 0;
  std::size_t excluded = 0;
  std::vector<std::vector<double>> estimates;  // one d-vector per kept replication
  std::vector<double> mean;
  std::vector<double> variance;
};

struct VarianceCurve {
  std::vector<VariancePoint> points;
  std::vector<LinearFit> slope;  // variance against n, per coordinate, HC3 errors

  std::size_t excluded() const {
    std::size_t e = 0;
    for (const auto& p : points) e += p.excluded;
    return e;
  }
  /// max_n var / min_n var for coordinate r.
  double variance_ratio(std::size_t r) const {
    double lo = HUGE_VAL, hi = 0.0;
    for (const auto& p : points) {
      lo = std::min(lo, p.variance[r]);
      hi = std::max(hi, p.variance[r]);
    }
    return hi / lo;
  }
};

/// R independent filter runs per grid point over one shared record `ys`. Runs
/// that hit a weight, row or likelihood collapse are dropped and counted.
template <StateSpaceModel M>
VarianceCurve run_variance_study(const M& model, std::span<const typename M::Obs> ys,
                                 const VarianceStudyConfig& cfg) {
  if (cfg.replications < 2) throw ContractViolation("variance study needs at least 2 replications");
  if (cfg.grid.empty()) throw ContractViolation("variance study needs a non-empty grid");
  const std::size_t d = model.dim();
  const std::size_t g = cfg.grid.size();
  const std::size_t total = g * cfg.replications;
  std::vector<std::vector<double>> est(total);
  std::vector<char> ok(total, 0);
  std::vector<std::exception_ptr> errors(total);

  const auto count = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const std::size_t gi = static_cast<std::size_t>(k) / cfg.replications;
    try {
      ok[k] = run_flagged([&] {
        est[k] = block_score(model, ys, cfg.grid[gi], cfg.block_length, cfg.num_particles,
                             replication_seed(cfg.seed, static_cast<std::uint64_t>(k)), cfg.estimator);
      });
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  VarianceCurve curve;
  std::vector<double> xs;
  std::vector<std::vector<double>> vs(d);
  for (std::size_t gi = 0; gi < g; ++gi) {
    VariancePoint p;
    p.n = cfg.grid[gi];
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      const std::size_t k = gi * cfg.replications + r;
      if (ok[k])
        p.estimates.push_back(std::move(est[k]));
      else
        ++p.excluded;
    }
    if (p.estimates.size() < 2)
      throw std::runtime_error("fewer than 2 usable replications at n = " + std::to_string(p.n));
    std::vector<double> col(p.estimates.size());
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t i = 0; i < col.size(); ++i) col[i] = p.estimates[i][r];
      p.mean.push_back(sample_mean(col));
      p.variance.push_back(sample_variance(col));
      vs[r].push_back(p.variance.back());
    }
    xs.push_back(static_cast<double>(p.n));
    curve.points.push_back(std::move(p));
  }
  if (g >= 3)
    for (std::size_t r = 0; r < d; ++r) curve.slope.push_back(fit_line(xs, vs[r], true));
  return curve;
}

// ---------------------------------------------------------------------------
// Recursive maximum likelihood over a record.

struct RmlRunConfig {
  StepSizeSchedule schedule = StepSizeSchedule::constant(0.0);
  std::size_t average_window = 1000;
};

struct RmlRunResult {
  std::vector<double> converged;  // mean of the last `average_window` iterates
  std::vector<double> final_theta;
  std::size_t steps = 0;
  std::size_t clamp_events = 0;
};

/// Feeds every observation of `ys` to rml_step. `on_step` sees each record as
/// it is produced, so long traces need not be held in memory.
template <StateSpaceModel M, class Filter>
RmlRunResult run_rml(RmlState<M, Filter>& state, std::span<const typename M::Obs> ys, const RmlRunConfig& cfg,
                     const std::function<void(const RmlStepRecord&)>& on_step = {}) {
  if (cfg.average_window < 1) throw ContractViolation("averaging window must be at least 1");
  const std::size_t d = state.model.dim();
  const std::size_t start = ys.size() > cfg.average_window ? ys.size() - cfg.average_window : 0;
  RmlRunResult out;
  out.converged.assign(d, 0.0);
  for (std::size_t n = 0; n < ys.size(); ++n) {
    const auto rec = rml_step(state, ys[n], cfg.schedule);
    if (n >= start)
      for (std::size_t r = 0; r < d; ++r) out.converged[r] += rec.theta[r];
    if (on_step) on_step(rec);
  }
  const double used = static_cast<double>(ys.size() - start);
  if (used > 0)
    for (auto& v : out.converged) v /= used;
  else
    out.converged = state.model.theta().values;
  out.final_theta = state.model.theta().values;
  out.steps = ys.size();
  out.clamp_events = state.clamp_events;
  return out;
}

// ---------------------------------------------------------------------------
// Convergence rate of zeta^N(phi) against the exact finite-HMM derivative.

struct RateStudyConfig {
  Estimator estimator = Estimator::backward_kernel;
  std::vector<std::size_t> particle_grid{50, 200, 800, 3200};
  std::size_t time = 25;
  std::size_t replications = 200;
  TestFunction phi = TestFunction::indicator(0);
  std::uint64_t seed = 1;
};

struct RatePoint {
  std::size_t num_particles = 0;
  std::size_t excluded = 0;
  std::vector<double> rmse;  // per coordinate
  std::vector<double> bias;
};

struct RateCurve {
  std::vector<double> exact_zeta;  // zeta_n(phi)
  std::vector<RatePoint> points;
  /// log RMSE against log N per coordinate; empty when some RMSE is zero.
  std::vector<LinearFit> slope;
};

/// Runs to time cfg.time on y_{0:time-1}, R replications per N.
RateCurve run_rate_study(const FiniteHmm& model, std::span<const int> ys, const RateStudyConfig& cfg);

}  // namespace smcd
