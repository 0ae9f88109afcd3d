#include <doctest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "smcd/fderiv.hpp"
#include "smcd/fderiv_reference.hpp"
#include "smcd/harness.hpp"
#include "smcd/oracle.hpp"
#include "smcd/stats.hpp"
#include "support.hpp"

using namespace smcd;
using namespace smcd::test;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) e = std::max(e, std::abs(a.data()[i] - b.data()[i]));
  return e;
}

double max_abs(const Matrix& a) {
  double e = 0.0;
  for (double v : a.data()) e = std::max(e, std::abs(v));
  return e;
}

/// Runs `steps` filter steps and compares the streaming T̄ update with the
/// materializing reference at every step.
template <class M>
double worst_reference_gap(const M& m, const std::vector<typename M::Obs>& ys, std::size_t n) {
  auto cloud = init_cloud(m, n, 31);
  auto tbar = init_tbar(m, cloud);
  double worst = 0.0;
  for (const auto& y : ys) {
    auto next = bootstrap_step(m, cloud, y);
    const auto fast = update_tbar(m, cloud, next, y, tbar);
    const auto [ref, w] = update_tbar_reference(m, cloud, next, y, tbar);
    worst = std::max(worst, max_abs_diff(fast.values, ref.values) / std::max(1.0, max_abs(ref.values)));
    cloud = std::move(next);
    tbar = fast;
  }
  return worst;
}

/// A transition that forbids 0 -> 1.
class NoZeroToOne {
 public:
  using State = int;
  using Obs = int;
  explicit NoZeroToOne(FiniteHmm m) : m_(std::move(m)) {}
  std::size_t dim() const { return m_.dim(); }
  const Theta& theta() const { return m_.theta(); }
  NoZeroToOne with_theta(const Theta& t) const { return NoZeroToOne(m_.with_theta(t)); }
  ThetaBox default_box() const { return m_.default_box(); }
  double log_initial(int x) const { return m_.log_initial(x); }
  double log_transition(int p, int x) const { return p == 0 && x == 1 ? -HUGE_VAL : m_.log_transition(p, x); }
  double log_observation(int y, int x) const { return m_.log_observation(y, x); }
  void grad_log_initial(int x, std::span<double> o) const { m_.grad_log_initial(x, o); }
  void grad_log_transition(int p, int x, std::span<double> o) const { m_.grad_log_transition(p, x, o); }
  void grad_log_observation(int y, int x, std::span<double> o) const { m_.grad_log_observation(y, x, o); }
  int sample_initial(Rng& r) const { return m_.sample_initial(r); }
  int sample_transition(int p, Rng& r) const { return m_.sample_transition(p, r); }
  int sample_observation(int x, Rng& r) const { return m_.sample_observation(x, r); }

 private:
  FiniteHmm m_;
};

}  // namespace

TEST_CASE("streaming T-bar update matches the materialized reference") {
  SUBCASE("stochastic volatility") {
    const auto m = make_sv(Theta({0.8, std::sqrt(0.1), 1.0}, {}));
    CHECK(worst_reference_gap(m, simulate(m, 12, 1).observations, 300) < 1e-12);
  }
  SUBCASE("lgssm") {
    const auto m = make_lgssm(Theta({0.9, 0.5, 0.7}, {}));
    CHECK(worst_reference_gap(m, simulate(m, 12, 2).observations, 300) < 1e-12);
  }
  SUBCASE("finite HMM, tabulated transition path") {
    const auto m = random_affine_hmm(4, 3, 3, 5, {0.2, -0.4, 0.9});
    CHECK(worst_reference_gap(m, simulate(m, 12, 3).observations, 300) < 1e-12);
  }
  SUBCASE("finite HMM through the generic path") {
    const ShiftedModel m(random_affine_hmm(4, 3, 3, 5, {0.2, -0.4, 0.9}), 1.0, -2.0, 0.5);
    CHECK(worst_reference_gap(m, simulate(m, 12, 3).observations, 300) < 1e-12);
  }
}

TEST_CASE("backward weight matrix") {
  const auto m = make_sv(Theta({0.8, 0.3, 1.0}, {}));
  const auto c0 = init_cloud(m, 200, 4);
  const auto c1 = bootstrap_step(m, c0, 0.4);
  const auto w = backward_weight_matrix(m, c0, c1, 0.4);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) {
      CHECK(w(i, j) >= 0.0);
      s += w(i, j);
    }
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
  SUBCASE("invariant to constants added to the log-densities") {
    const ShiftedModel shifted(m, 4.0, -30.0, 12.0);
    CHECK(max_abs_diff(backward_weight_matrix(shifted, c0, c1, 0.4), w) < 1e-14);
  }
}

TEST_CASE("T-bar update edge cases") {
  SUBCASE("one particle: W = [[1]] and T̄ gains one increment") {
    const auto m = make_lgssm(Theta({0.5, 1.0, 0.5}, {}));
    const auto c0 = init_cloud(m, 1, 3);
    const auto c1 = bootstrap_step(m, c0, 0.2);
    const auto t0 = init_tbar(m, c0);
    const auto t1 = update_tbar(m, c0, c1, 0.2, t0);
    const auto inc = score_increment(m, 0.2, c0.particles[0], c1.particles[0]);
    for (std::size_t r = 0; r < 3; ++r) CHECK(t1.values(0, r) == doctest::Approx(t0.values(0, r) + inc[r]).epsilon(1e-14));
    const auto [ref, w] = update_tbar_reference(m, c0, c1, 0.2, t0);
    CHECK(w(0, 0) == 1.0);
  }
  SUBCASE("zero score stays zero") {
    const FiniteHmm m(constant_hmm_structure(3, 3, 2), Theta({0.5, 0.5}, {}));
    DerivativeFilter<FiniteHmm> f(Estimator::backward_kernel, m, 100, 2);
    for (int y : {0, 1, 2, 2, 1}) f.advance(m, y);
    CHECK(max_abs(f.table()) == 0.0);
  }
  SUBCASE("a row with no mass is reported with its index") {
    const NoZeroToOne m(make_finite_hmm(3, Theta({1.0, 1.0}, {})));
    ParticleCloud<int> prev{0, {0, 0, 0}, {}, 1};
    ParticleCloud<int> cur{1, {2, 1, 0}, {0, 1, 2}, 1};
    try {
      (void)update_tbar(m, prev, cur, 0, init_tbar(m, prev));
      FAIL("expected a degenerate row");
    } catch (const DegenerateBackwardRow& e) {
      CHECK(e.time() == 1);
      CHECK(e.row() == 1);
    }
  }
  SUBCASE("misaligned tables are rejected") {
    const auto m = make_finite_hmm(3, Theta({1.0, 1.0}, {}));
    const auto c0 = init_cloud(m, 10, 1);
    const auto c1 = bootstrap_step(m, c0, 0);
    const auto c2 = bootstrap_step(m, c1, 0);
    CHECK_THROWS_AS(update_tbar(m, c1, c2, 0, init_tbar(m, c0)), ContractViolation);
  }
  SUBCASE("result does not depend on the thread count") {
    const auto m = make_sv(Theta({0.8, 0.3, 1.0}, {}));
    auto run = [&](int threads) {
      omp_set_num_threads(threads);
      DerivativeFilter<StochasticVolatilityModel> f(Estimator::backward_kernel, m, 400, 6);
      for (double y : {0.1, -0.5, 1.3, 0.2}) f.advance(m, y);
      return f.table();
    };
    const int saved = omp_get_max_threads();
    const auto a = run(1);
    const auto b = run(3);
    omp_set_num_threads(saved);
    CHECK(a == b);
  }
}

TEST_CASE("backward-kernel update on exactly weighted atoms is the exact recursion") {
  auto check = [](const auto& m, const FiniteHmm& base, const std::vector<int>& ys) {
    const std::size_t k = base.num_states();
    ParticleCloud<int> atoms{0, std::vector<int>(k), {}, 0};
    std::iota(atoms.particles.begin(), atoms.particles.end(), 0);
    auto tbar = init_tbar(m, atoms);
    auto exact = exact_hmm_init(base);
    double worst = max_abs_diff(tbar.values, exact.tbar);
    for (int y : ys) {
      std::vector<double> logw(k);
      for (std::size_t x = 0; x < k; ++x) logw[x] = std::log(exact.eta[x]);
      ParticleCloud<int> next = atoms;
      next.time = atoms.time + 1;
      next.ancestors.assign(k, 0);
      tbar = update_tbar(m, atoms, next, y, tbar, logw);
      exact = exact_hmm_step(base, exact, y);
      worst = std::max(worst, max_abs_diff(tbar.values, exact.tbar) / std::max(1.0, max_abs(exact.tbar)));
      atoms = next;
    }
    return worst;
  };
  const auto base = random_affine_hmm(4, 3, 3, 17, {0.5, -0.3, 1.1});
  const auto ys = simulate(base, 40, 2).observations;
  CHECK(check(base, base, ys) < 1e-12);
  CHECK(check(ShiftedModel(base, 0.0, 0.0, 0.0), base, ys) < 1e-12);
}

TEST_CASE("signed particle measure") {
  const auto m = make_sv(Theta({0.8, 0.3, 1.0}, {}));
  DerivativeFilter<StochasticVolatilityModel> f(Estimator::backward_kernel, m, 300, 1);
  for (double y : {0.4, -0.2, 1.5}) f.advance(m, y);
  const auto z = f.zeta();
  SUBCASE("total mass is zero") {
    for (double v : z.total_mass()) CHECK(std::abs(v) < 1e-10 * std::max(1.0, max_abs(f.table())));
  }
  SUBCASE("affine equivariance") {
    const auto phi = [](double x) { return std::tanh(x); };
    const auto base = z.evaluate(phi);
    const auto shifted = z.evaluate([&](double x) { return -2.5 * phi(x) + 7.0; });
    for (std::size_t r = 0; r < 3; ++r) CHECK(std::abs(shifted[r] + 2.5 * base[r]) <= 1e-10 * std::max(1.0, std::abs(2.5 * base[r])));
  }
  SUBCASE("equal rows give the zero measure") {
    Matrix same(4, 2, 3.25);
    const ParticleCloud<double> c{0, {0.1, 0.2, 0.3, 0.4}, {}, 0};
    const auto zs = zeta_from_tbar(c, TBarTable{0, same});
    CHECK(max_abs(zs.signed_weights()) == 0.0);
    CHECK(zs.evaluate([](double x) { return x * x; }) == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("weights are centered and scaled by 1/N") {
    Matrix v(2, 1);
    v(0, 0) = 1.0;
    v(1, 0) = 3.0;
    const ParticleCloud<double> c{0, {0.0, 1.0}, {}, 0};
    const auto zs = zeta_path(c, PathScoreTable{0, v});
    CHECK(zs.signed_weights()(0, 0) == -0.5);
    CHECK(zs.signed_weights()(1, 0) == 0.5);
  }
}

TEST_CASE("path-space scores") {
  const auto m = make_lgssm(Theta({0.8, 0.6, 0.5}, {}));
  const auto c0 = init_cloud(m, 50, 2);
  SUBCASE("time zero holds the initial-law gradient") {
    const auto s0 = init_path_scores(m, c0);
    for (std::size_t i = 0; i < 50; ++i) {
      const auto t = score_increment(m, c0.particles[i]);
      for (std::size_t r = 0; r < 3; ++r) CHECK(s0.values(i, r) == t[r]);
    }
  }
  SUBCASE("one step adds the increment along the ancestor") {
    const auto c1 = bootstrap_step(m, c0, 0.3);
    const auto s0 = init_path_scores(m, c0);
    const auto s1 = update_path_scores(m, c0, c1, 0.3, s0);
    for (std::size_t i = 0; i < 50; ++i) {
      const auto a = c1.ancestors[i];
      const auto t = score_increment(m, 0.3, c0.particles[a], c1.particles[i]);
      for (std::size_t r = 0; r < 3; ++r) CHECK(s1.values(i, r) == doctest::Approx(s0.values(a, r) + t[r]).epsilon(1e-14));
    }
  }
  SUBCASE("zero increments just copy along the lineage") {
    const FiniteHmm flat(constant_hmm_structure(3, 2, 1), Theta({0.0}, {}));
    auto c = init_cloud(flat, 20, 4);
    auto s = init_path_scores(flat, c);
    for (std::size_t i = 0; i < 20; ++i) s.values(i, 0) = double(i);
    std::vector<std::size_t> root(20);
    std::iota(root.begin(), root.end(), 0);
    for (int y : {0, 1, 1, 0}) {
      auto next = bootstrap_step(flat, c, y);
      s = update_path_scores(flat, c, next, y, s);
      std::vector<std::size_t> nr(20);
      for (std::size_t i = 0; i < 20; ++i) nr[i] = root[next.ancestors[i]];
      root = nr;
      c = std::move(next);
    }
    for (std::size_t i = 0; i < 20; ++i) CHECK(s.values(i, 0) == double(root[i]));
  }
  SUBCASE("missing or bad ancestry is a contract violation") {
    auto c1 = bootstrap_step(m, c0, 0.3);
    const auto s0 = init_path_scores(m, c0);
    auto no_anc = c1;
    no_anc.ancestors.clear();
    CHECK_THROWS_AS(update_path_scores(m, c0, no_anc, 0.3, s0), ContractViolation);
    c1.ancestors[3] = 50;
    CHECK_THROWS_AS(update_path_scores(m, c0, c1, 0.3, s0), ContractViolation);
  }
}

TEST_CASE("both estimators agree with the exact derivative at n = 1") {
  const auto m = make_finite_hmm(3, Theta({1.0, 1.0}, {}));
  const int y0 = 2;
  const auto exact = exact_hmm_step(m, exact_hmm_init(m), y0);
  const std::vector<double> phi{1.0, 0.0, 0.0};
  const auto truth = exact_zeta(exact, phi);
  for (auto est : {Estimator::backward_kernel, Estimator::path_space}) {
    const std::size_t reps = 30;
    std::vector<std::vector<double>> z(2);
    for (std::uint64_t r = 0; r < reps; ++r) {
      DerivativeFilter<FiniteHmm> f(est, m, 2000, replication_seed(5, r));
      f.advance(m, y0);
      const auto v = f.zeta().evaluate([&](int x) { return phi[x]; });
      for (std::size_t c = 0; c < 2; ++c) z[c].push_back(v[c]);
    }
    for (std::size_t c = 0; c < 2; ++c) {
      const double se = std::sqrt(sample_variance(z[c]) / reps);
      CHECK(std::abs(sample_mean(z[c]) - truth[c]) < 5 * se + 1e-12);
    }
  }
}

TEST_CASE("backward-kernel estimator tracks the exact conditional score and derivative") {
  // Scaled-down replicate study: N = 1000, 40 replications, n = 20.
  const auto m = make_finite_hmm(3, Theta({1.0, 1.0}, {}));
  const auto ys = simulate(m, 20, 8).observations;
  auto exact = exact_hmm_init(m);
  for (int y : ys) exact = exact_hmm_step(m, exact, y);
  const std::vector<double> phi{1.0, 0.0, 0.0};
  const auto z_true = exact_zeta(exact, phi);
  std::vector<double> t_true(2, 0.0);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t r = 0; r < 2; ++r) t_true[r] += exact.eta[x] * exact.tbar(x, r);

  const std::size_t reps = 40;
  std::vector<std::vector<double>> tm(2), zv(2);
  for (std::uint64_t r = 0; r < reps; ++r) {
    DerivativeFilter<FiniteHmm> f(Estimator::backward_kernel, m, 1000, replication_seed(9, r));
    for (int y : ys) f.advance(m, y);
    const auto mean = f.table().column_means();
    const auto z = f.zeta().evaluate([&](int x) { return phi[x]; });
    for (std::size_t c = 0; c < 2; ++c) {
      tm[c].push_back(mean[c]);
      zv[c].push_back(z[c]);
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(std::abs(sample_mean(tm[c]) - t_true[c]) < 5 * std::sqrt(sample_variance(tm[c]) / reps));
    CHECK(std::abs(sample_mean(zv[c]) - z_true[c]) < 5 * std::sqrt(sample_variance(zv[c]) / reps));
  }
}
