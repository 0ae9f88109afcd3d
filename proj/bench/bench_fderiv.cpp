// Parallel streaming backward-kernel update vs the serial materializing
// reference, plus the O(N) path-space update for scale.

#include <benchmark/benchmark.h>

#include <vector>

#include "smcd/fderiv.hpp"
#include "smcd/fderiv_reference.hpp"
#include "smcd/finite_hmm.hpp"
#include "smcd/gaussian_models.hpp"

namespace {

template <class M>
struct Fixture {
  M model;
  smcd::ParticleCloud<typename M::State> prev, cur;
  smcd::TBarTable tbar;
  smcd::PathScoreTable path;
  typename M::Obs y{};

  Fixture(M m, std::size_t n, typename M::Obs y0) : model(std::move(m)), y(y0) {
    prev = smcd::init_cloud(model, n, 7);
    cur = smcd::bootstrap_step(model, prev, y);
    tbar = smcd::init_tbar(model, prev);
    path = smcd::init_path_scores(model, prev);
  }
};

smcd::StochasticVolatilityModel sv() { return smcd::make_sv(smcd::Theta({0.8, 0.316227766, 1.0}, {})); }
smcd::FiniteHmm hmm() { return smcd::make_finite_hmm(3, smcd::Theta({1.5, 1.0}, {})); }

void BM_TBarParallel_SV(benchmark::State& st) {
  Fixture f(sv(), st.range(0), 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(smcd::update_tbar(f.model, f.prev, f.cur, f.y, f.tbar));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}
void BM_TBarReference_SV(benchmark::State& st) {
  Fixture f(sv(), st.range(0), 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(smcd::update_tbar_reference(f.model, f.prev, f.cur, f.y, f.tbar));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}
void BM_TBarParallel_HMM(benchmark::State& st) {
  Fixture f(hmm(), st.range(0), 1);
  for (auto _ : st) benchmark::DoNotOptimize(smcd::update_tbar(f.model, f.prev, f.cur, f.y, f.tbar));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}
void BM_TBarReference_HMM(benchmark::State& st) {
  Fixture f(hmm(), st.range(0), 1);
  for (auto _ : st) benchmark::DoNotOptimize(smcd::update_tbar_reference(f.model, f.prev, f.cur, f.y, f.tbar));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}
void BM_PathScores_SV(benchmark::State& st) {
  Fixture f(sv(), st.range(0), 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(smcd::update_path_scores(f.model, f.prev, f.cur, f.y, f.path));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_TBarParallel_SV)->Arg(200)->Arg(500)->Arg(2000);
BENCHMARK(BM_TBarReference_SV)->Arg(200)->Arg(500)->Arg(2000);
BENCHMARK(BM_TBarParallel_HMM)->Arg(200)->Arg(500)->Arg(2000);
BENCHMARK(BM_TBarReference_HMM)->Arg(200)->Arg(500)->Arg(2000);
BENCHMARK(BM_PathScores_SV)->Arg(10000);

BENCHMARK_MAIN();
