#include "smcd/harness.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "smcd/oracle.hpp"

namespace smcd {

RateCurve run_rate_study(const FiniteHmm& model, std::span<const int> ys, const RateStudyConfig& cfg) {
  if (cfg.particle_grid.size() < 3) throw std::invalid_argument("rate study: need >= 3 grid points");
  if (cfg.replications < 1) throw ContractViolation("rate study needs at least one replication");
  if (ys.size() < cfg.time) throw ContractViolation("rate study: observation record shorter than the target time");
  const std::size_t d = model.dim();
  const std::size_t k = model.num_states();

  std::vector<double> phi(k);
  for (std::size_t x = 0; x < k; ++x) phi[x] = cfg.phi(static_cast<int>(x));
  auto exact = exact_hmm_init(model);
  for (std::size_t n = 1; n <= cfg.time; ++n) exact = exact_hmm_step(model, exact, ys[n - 1]);

  RateCurve curve;
  curve.exact_zeta = exact_zeta(exact, phi);

  const std::size_t g = cfg.particle_grid.size();
  const std::size_t total = g * cfg.replications;
  std::vector<std::vector<double>> est(total);
  std::vector<char> ok(total, 0);
  std::vector<std::exception_ptr> errors(total);
  const auto count = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const std::size_t gi = static_cast<std::size_t>(i) / cfg.replications;
    try {
      ok[i] = run_flagged([&] {
        DerivativeFilter<FiniteHmm> filter(cfg.estimator, model, cfg.particle_grid[gi],
                                           replication_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        for (std::size_t n = 1; n <= cfg.time; ++n) filter.advance(model, ys[n - 1]);
        est[i] = filter.zeta().evaluate([&](int x) { return phi[x]; });
      });
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> log_n;
  std::vector<std::vector<double>> log_rmse(d);
  bool all_positive = true;
  for (std::size_t gi = 0; gi < g; ++gi) {
    RatePoint p;
    p.num_particles = cfg.particle_grid[gi];
    p.rmse.assign(d, 0.0);
    p.bias.assign(d, 0.0);
    std::size_t used = 0;
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      const std::size_t i = gi * cfg.replications + r;
      if (!ok[i]) {
        ++p.excluded;
        continue;
      }
      ++used;
      for (std::size_t c = 0; c < d; ++c) {
        const double e = est[i][c] - curve.exact_zeta[c];
        p.rmse[c] += e * e;
        p.bias[c] += e;
      }
    }
    if (used == 0) throw std::runtime_error("rate study: every replication failed at N = " +
                                            std::to_string(p.num_particles));
    for (std::size_t c = 0; c < d; ++c) {
      p.rmse[c] = std::sqrt(p.rmse[c] / static_cast<double>(used));
      p.bias[c] /= static_cast<double>(used);
      all_positive = all_positive && p.rmse[c] > 0.0;
      log_rmse[c].push_back(std::log(p.rmse[c]));
    }
    log_n.push_back(std::log(static_cast<double>(p.num_particles)));
    curve.points.push_back(std::move(p));
  }
  if (all_positive)
    for (std::size_t c = 0; c < d; ++c) curve.slope.push_back(fit_line(log_n, log_rmse[c], false));
  return curve;
}

}  // namespace smcd
