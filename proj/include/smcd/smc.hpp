#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "smcd/errors.hpp"
#include "smcd/model.hpp"
#include "smcd/rng.hpp"

namespace smcd {

/// N equally weighted particles approximating the predictive filter at `time`
/// (the law of X_n given y_{0:n-1}), plus the ancestor of each particle in the
/// cloud at time - 1. `ancestors` is empty at time 0.
template <class State>
struct ParticleCloud {
  std::size_t time = 0;
  std::vector<State> particles;
  std::vector<std::size_t> ancestors;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return particles.size(); }
  bool has_ancestors() const noexcept { return ancestors.size() == particles.size(); }
};

/// Weights of the bootstrap mixture: log g(y_{n-1} | X_{n-1}^{(j)}) and their
/// normalization.
struct MixtureWeights {
  std::vector<double> logw;
  std::vector<double> normalized;
  double log_max = 0.0;  // max_j logw[j]
  double log_mean = 0.0; // log (1/N) sum_j exp(logw[j])
};

/// The generator for everything drawn while building the cloud at time `n`.
inline Rng step_stream(std::uint64_t seed, std::size_t n) { return Rng(seed).substream(n); }

inline constexpr std::uint64_t kResampleStream = ~std::uint64_t{0};

/// Max-subtracted normalization of log-weights. `n` is reported on collapse.
inline MixtureWeights normalize_log_weights(std::vector<double> logw, std::size_t n) {
  MixtureWeights w;
  w.logw = std::move(logw);
  const std::size_t count = w.logw.size();
  double mx = -HUGE_VAL;
  for (double v : w.logw) {
    if (std::isnan(v)) throw WeightCollapse(n);
    mx = std::max(mx, v);
  }
  if (!(mx > -HUGE_VAL) || !std::isfinite(mx)) throw WeightCollapse(n);
  w.normalized.resize(count);
  double sum = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    w.normalized[j] = std::exp(w.logw[j] - mx);
    sum += w.normalized[j];
  }
  for (auto& v : w.normalized) v /= sum;
  w.log_max = mx;
  w.log_mean = mx + std::log(sum / static_cast<double>(count));
  return w;
}

template <StateSpaceModel M>
MixtureWeights mixture_weights(const M& model, const ParticleCloud<typename M::State>& cloud,
                               const typename M::Obs& y) {
  std::vector<double> logw(cloud.size());
  const auto count = static_cast<std::ptrdiff_t>(cloud.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < count; ++j) logw[j] = model.log_observation(y, cloud.particles[j]);
  return normalize_log_weights(std::move(logw), cloud.time + 1);
}

/// Exact multinomial draw of `count` indices from `probs` by inverse CDF on
/// sorted uniforms. Sorted uniforms come from normalized exponential spacings,
/// so the pass is O(N) and the returned indices are non-decreasing.
inline std::vector<std::size_t> multinomial_ancestors(std::span<const double> probs,
                                                      std::size_t count, Rng rng) {
  if (probs.empty()) throw ContractViolation("multinomial draw from an empty weight vector");
  std::vector<double> spacing(count + 1);
  double total = 0.0;
  for (auto& e : spacing) {
    e = rng.exponential();
    total += e;
  }
  std::vector<std::size_t> out(count);
  std::size_t j = 0;
  double cdf = probs[0];
  double running = 0.0;
  const std::size_t last = probs.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    running += spacing[i];
    const double u = running / total;
    while (u > cdf && j < last) cdf += probs[++j];
    out[i] = j;
  }
  // Rounding can leave the cumulative sum just short of 1; never return a
  // zero-probability index.
  for (auto& a : out)
    while (probs[a] <= 0.0 && a > 0) --a;
  return out;
}

/// N independent draws from the initial law.
template <StateSpaceModel M>
ParticleCloud<typename M::State> init_cloud(const M& model, std::size_t num_particles,
                                            std::uint64_t seed) {
  if (num_particles < 1) throw ContractViolation("particle count must be at least 1");
  ParticleCloud<typename M::State> cloud;
  cloud.time = 0;
  cloud.seed = seed;
  cloud.particles.resize(num_particles);
  const Rng stream = step_stream(seed, 0);
  const auto count = static_cast<std::ptrdiff_t>(num_particles);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Rng rng = stream.substream(static_cast<std::uint64_t>(i));
    cloud.particles[i] = model.sample_initial(rng);
  }
  return cloud;
}

/// One step of the bootstrap filter from time n-1 to n: ancestors are drawn
/// from the mixture weights g(y_{n-1}|X_{n-1}^{(j)}), then each particle moves
/// through f. Equivalent in law to i.i.d. draws from the mixture
///   sum_j f(x | X_{n-1}^{(j)}) g(y_{n-1} | X_{n-1}^{(j)}) / sum_j g(y_{n-1} | X_{n-1}^{(j)}).
template <StateSpaceModel M>
ParticleCloud<typename M::State> bootstrap_step(const M& model,
                                                const ParticleCloud<typename M::State>& prev,
                                                const typename M::Obs& y_prev,
                                                MixtureWeights* weights_out = nullptr) {
  if (prev.size() == 0) throw ContractViolation("bootstrap step on an empty cloud");
  const std::size_t n = prev.time + 1;
  MixtureWeights w = mixture_weights(model, prev, y_prev);
  const Rng stream = step_stream(prev.seed, n);

  ParticleCloud<typename M::State> next;
  next.time = n;
  next.seed = prev.seed;
  next.ancestors = multinomial_ancestors(w.normalized, prev.size(), stream.substream(kResampleStream));
  next.particles.resize(prev.size());
  const auto count = static_cast<std::ptrdiff_t>(prev.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Rng rng = stream.substream(static_cast<std::uint64_t>(i));
    next.particles[i] = model.sample_transition(prev.particles[next.ancestors[i]], rng);
  }
  if (weights_out) *weights_out = std::move(w);
  return next;
}

/// eta^N(phi) for a scalar test function.
template <class State, class Fn>
double empirical_mean(const ParticleCloud<State>& cloud, Fn&& phi) {
  double s = 0.0;
  for (const auto& x : cloud.particles) s += phi(x);
  return s / static_cast<double>(cloud.size());
}

}  // namespace smcd
