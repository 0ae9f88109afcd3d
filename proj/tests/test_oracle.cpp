#include <doctest.h>

#include <cmath>
#include <vector>

#include "smcd/harness.hpp"
#include "smcd/oracle.hpp"
#include "support.hpp"

using namespace smcd;
using namespace smcd::test;

TEST_CASE("exact HMM recursion against brute-force path sums") {
  const auto m = random_affine_hmm(3, 3, 3, 23, {0.4, -0.7, 1.2});
  const auto ys = simulate(m, 4, 6).observations;
  const std::vector<double> phi{0.3, -1.0, 2.0};
  auto st = exact_hmm_init(m);
  for (std::size_t n = 0; n <= ys.size(); ++n) {
    if (n > 0) st = exact_hmm_step(m, st, ys[n - 1]);
    const std::span<const int> prefix(ys.data(), n);
    const auto bf = brute_force_filter(m, prefix, phi);
    CAPTURE(n);
    for (std::size_t x = 0; x < 3; ++x) CHECK(rel_error(st.eta[x], bf.eta[x]) < 1e-12);
    CHECK(max_rel_error(exact_zeta(st, phi), bf.zeta_phi) < 1e-10);
    CHECK(rel_error(st.log_evidence, bf.log_evidence) < 1e-12);
    if (n > 0) CHECK(max_rel_error(exact_hmm_score(m, prefix).gradient, bf.score) < 1e-10);
  }
}

TEST_CASE("brute-force derivatives agree with finite differences of the path sum") {
  const auto m = random_affine_hmm(3, 2, 3, 29, {-0.2, 0.5, 0.1});
  const std::vector<int> ys{1, 0, 0, 1};
  const std::vector<double> phi{1.0, 0.0, 0.0};
  const auto bf = brute_force_filter(m, ys, phi);
  const auto fd = central_difference([&](const Theta& t) { return brute_force_log_evidence(m.with_theta(t), ys); },
                                     m.theta());
  CHECK(max_rel_error(bf.score, fd) < 1e-6);
  // eta_4(phi) is a ratio of path sums; differentiate it numerically too.
  const auto fd_eta = central_difference(
      [&](const Theta& t) {
        const std::vector<int> head(ys.begin(), ys.end());
        return brute_force_filter(m.with_theta(t), head, phi).eta[0];
      },
      m.theta());
  CHECK(max_rel_error(bf.zeta_phi, fd_eta) < 1e-6);
}

TEST_CASE("exact score") {
  const auto m = make_finite_hmm(3, Theta({1.0, 0.6}, {}));
  const auto ys = simulate(m, 30, 4).observations;
  const auto s = exact_hmm_score(m, ys);
  SUBCASE("increments telescope to the batch score") {
    std::vector<double> sum(2, 0.0);
    for (const auto& inc : s.increments)
      for (std::size_t r = 0; r < 2; ++r) sum[r] += inc[r];
    CHECK(max_rel_error(sum, s.gradient) < 1e-12);
  }
  SUBCASE("gradient matches finite differences of the exact log-evidence") {
    const auto fd =
        central_difference([&](const Theta& t) { return exact_hmm_score(m.with_theta(t), ys).log_evidence; }, m.theta());
    CHECK(max_rel_error(s.gradient, fd) < 1e-6);
  }
  SUBCASE("agrees with brute force for a short record") {
    const std::vector<int> head(ys.begin(), ys.begin() + 4);
    CHECK(rel_error(exact_hmm_score(m, head).log_evidence, brute_force_log_evidence(m, head)) < 1e-12);
  }
  SUBCASE("uniform model: uniform filter and zero score") {
    const FiniteHmm u(constant_hmm_structure(3, 3, 2), Theta({0.2, 0.9}, {}));
    auto st = exact_hmm_init(u);
    for (int y : ys) {
      st = exact_hmm_step(u, st, y);
      for (double p : st.eta) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-14));
    }
    for (double v : st.tbar.data()) CHECK(v == 0.0);
    for (double g : exact_hmm_score(u, ys).gradient) CHECK(g == 0.0);
  }
  SUBCASE("filter derivative has zero total mass") {
    auto st = exact_hmm_init(m);
    for (int y : ys) {
      st = exact_hmm_step(m, st, y);
      for (double v : exact_zeta(st, std::vector<double>{1.0, 1.0, 1.0})) CHECK(std::abs(v) < 1e-14);
      double tot = 0.0;
      for (double p : st.eta) tot += p;
      CHECK(std::abs(tot - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("brute force refuses more than 10^6 paths") {
  const auto m = make_finite_hmm(3, Theta({0.0, 0.0}, {}));
  const std::vector<int> ys(13, 0);
  CHECK_THROWS_AS(brute_force_log_evidence(m, ys), DomainError);
  CHECK_NOTHROW(brute_force_log_evidence(m, std::span<const int>(ys.data(), 11)));
}

TEST_CASE("tangent Kalman filter") {
  SUBCASE("score matches finite differences of the Kalman log-evidence") {
    Rng rng(3);
    for (int k = 0; k < 5; ++k) {
      const Theta t({-0.9 + 1.8 * rng.uniform(), 0.3 + 1.5 * rng.uniform(), 0.3 + 1.5 * rng.uniform()}, {});
      const auto m = make_lgssm(t);
      const auto ys = simulate(m, 50, 10 + k).observations;
      const auto ks = tangent_kalman_score(m, ys);
      const auto fd = central_difference([&](const Theta& th) { return tangent_kalman_score(make_lgssm(th), ys).log_evidence; }, t);
      CHECK(max_rel_error(ks.gradient, fd) < 1e-6);
    }
  }
  SUBCASE("first evidence term is the Gaussian marginal of y_0") {
    const auto m = make_lgssm(Theta({0.6, 0.8, 0.5}, {}));
    const double y = 0.37;
    const double v = m.initial_variance() + 0.25;
    const auto ks = tangent_kalman_score(m, std::vector<double>{y});
    CHECK(ks.log_evidence == doctest::Approx(-0.5 * std::log(2 * M_PI * v) - 0.5 * y * y / v).epsilon(1e-14));
  }
  SUBCASE("increments telescope") {
    const auto m = make_lgssm(Theta({0.6, 0.8, 0.5}, {}));
    const auto ys = simulate(m, 20, 1).observations;
    const auto ks = tangent_kalman_score(m, ys);
    std::vector<double> sum(3, 0.0);
    for (const auto& inc : ks.increments)
      for (std::size_t r = 0; r < 3; ++r) sum[r] += inc[r];
    CHECK(max_rel_error(sum, ks.gradient) < 1e-12);
  }
  SUBCASE("zero process noise is rejected") { CHECK_THROWS_AS(make_lgssm(Theta({0.5, 0.0, 1.0}, {})), DomainError); }
}
