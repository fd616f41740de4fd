#include <benchmark/benchmark.h>

#include <cstdint>

#include "oscchain/dynamics.hpp"
#include "oscchain/estimators.hpp"
#include "oscchain/observables.hpp"
#include "oscchain/potential.hpp"
#include "oscchain/random.hpp"
#include "oscchain/sbe_reference.hpp"

using namespace oscchain;

namespace {

ChainState gibbs_chain(std::size_t len, const ScaledPotential& pot, double beta = 1.0) {
  RandomStream rng(7, 0);
  GibbsMarginal marginal(pot, beta);
  return sample_gibbs_state(len, marginal, 0.0, rng);
}

ScalingConfig small_cfg(std::size_t len) {
  ScalingConfig cfg;
  cfg.n = 32;
  cfg.lattice_len = len;
  return cfg;
}

}  // namespace

static void BM_Philox(benchmark::State& state) {
  RandomStream rng(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rng());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Philox);

static void BM_PhiloxNormal(benchmark::State& state) {
  RandomStream rng(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rng.normal());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PhiloxNormal);

static void BM_HamiltonianStep(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const bool toda = state.range(1) != 0;
  ScaledPotential pot(toda ? PotentialSpec::toda() : PotentialSpec::fput(1.0, 1.0), 1.0 / std::sqrt(32.0));
  auto chain = gibbs_chain(len, pot);
  HamiltonianIntegrator verlet(pot, 1.0);
  for (auto _ : state) {
    verlet.step(chain, 0.01);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_HamiltonianStep)->ArgsProduct({{256, 1024, 4096}, {0, 1}});

static void BM_ExchangeSweep(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  ScaledPotential pot(PotentialSpec::harmonic(), 1.0);
  auto chain = gibbs_chain(len, pot);
  RandomStream rng(3, 1);
  for (auto _ : state) {
    exchange_sweep(chain, 0.01, 1.0, rng);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_ExchangeSweep)->Arg(256)->Arg(4096);

static void BM_GibbsSampleToda(benchmark::State& state) {
  ScaledPotential pot(PotentialSpec::toda(), 1.0 / std::sqrt(32.0));
  GibbsMarginal marginal(pot, 1.0);
  RandomStream rng(5, 0);
  for (auto _ : state) benchmark::DoNotOptimize(marginal.sample(rng));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GibbsSampleToda);

static void BM_Integrands(benchmark::State& state) {
  const std::size_t len = 512;
  const auto cfg = small_cfg(len);
  ScaledPotential pot(PotentialSpec::fput(1.0, 1.0), cfg.epsilon());
  GibbsMarginal marginal(pot, 1.0);
  const auto eq = equilibrium_data(marginal, 0.0);
  const auto chain = gibbs_chain(len, pot);
  const auto phi = TestFunction::gaussian(box_center(cfg), 0.25);
  std::vector<Integrand> fns;
  switch (state.range(0)) {
    case 0: fns.push_back(qv_integrand(phi, 0.0, cfg)); break;
    case 1: fns.push_back(equipartition_integrand(phi, 0.0, cfg, 1.0, eq)); break;
    case 2: fns.push_back(bg2_integrand(phi, 0.0, cfg, 8, eq)); break;
    case 3: fns.push_back(quadratic_field_integrand(1, phi, 0.0, cfg, eq)); break;
    default: fns.push_back(bracket_integrand(1, phi, 0.0, -1, phi, 0.0, cfg, 1.0)); break;
  }
  for (auto _ : state) benchmark::DoNotOptimize(fns[0](chain, 0.0));
}
BENCHMARK(BM_Integrands)->DenseRange(0, 4)->ArgName("kind");

static void BM_SbeStep(benchmark::State& state) {
  auto params = SbeParams::for_chain(1, 1.0, 1.0, 1.0, TaylorCoefficients{1.0, 1.0, 1.0, 0.0},
                                     static_cast<std::size_t>(state.range(0)));
  RandomStream rng(9, 0);
  auto field = sbe_init_stationary(params, 1.0, rng);
  for (auto _ : state) {
    sbe_step(field, params, rng);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SbeStep)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
