#pragma once

// Serial, materializing versions of the backward-kernel update. Kept for
// testing the parallel kernels and for debugging; O(N^2) memory.

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "smcd/fderiv.hpp"

namespace smcd {

/// Builds W row by row in log-space with per-row max subtraction.
template <StateSpaceModel M>
BackwardWeightMatrix backward_weight_matrix(const M& model, const ParticleCloud<typename M::State>& prev,
                                            const ParticleCloud<typename M::State>& cur,
                                            const typename M::Obs& y_prev,
                                            std::span<const double> prev_logweights = {}) {
  BackwardWeightMatrix w(cur.size(), prev.size());
  for (std::size_t i = 0; i < cur.size(); ++i) {
    double mx = -HUGE_VAL;
    for (std::size_t j = 0; j < prev.size(); ++j) {
      double lw = model.log_observation(y_prev, prev.particles[j]) +
                  model.log_transition(prev.particles[j], cur.particles[i]);
      if (!prev_logweights.empty()) lw += prev_logweights[j];
      w(i, j) = lw;
      mx = std::max(mx, lw);
    }
    if (!(mx > -HUGE_VAL) || !std::isfinite(mx)) throw DegenerateBackwardRow(cur.time, i);
    double sum = 0.0;
    for (std::size_t j = 0; j < prev.size(); ++j) {
      w(i, j) = std::exp(w(i, j) - mx);
      sum += w(i, j);
    }
    for (std::size_t j = 0; j < prev.size(); ++j) w(i, j) /= sum;
  }
  return w;
}

/// Reference for update_tbar: returns the new table together with W.
template <StateSpaceModel M>
std::pair<TBarTable, BackwardWeightMatrix> update_tbar_reference(
    const M& model, const ParticleCloud<typename M::State>& prev,
    const ParticleCloud<typename M::State>& cur, const typename M::Obs& y_prev,
    const TBarTable& tbar_prev, std::span<const double> prev_logweights = {}) {
  if (tbar_prev.time != prev.time || cur.time != prev.time + 1 || tbar_prev.size() != prev.size())
    throw ContractViolation("update_tbar_reference: inputs are not aligned");
  auto w = backward_weight_matrix(model, prev, cur, y_prev, prev_logweights);
  const std::size_t d = model.dim();
  TBarTable out;
  out.time = cur.time;
  out.values = Matrix(cur.size(), d);
  for (std::size_t i = 0; i < cur.size(); ++i) {
    for (std::size_t j = 0; j < prev.size(); ++j) {
      if (w(i, j) == 0.0) continue;
      const auto t = score_increment(model, y_prev, prev.particles[j], cur.particles[i]);
      for (std::size_t r = 0; r < d; ++r) out.values(i, r) += w(i, j) * (tbar_prev.values(j, r) + t[r]);
    }
  }
  return {std::move(out), std::move(w)};
}

}  // namespace smcd
