#include <benchmark/benchmark.h>

#include "agebranch/extinction.hpp"
#include "agebranch/model.hpp"
#include "agebranch/renewal.hpp"
#include "agebranch/simulate.hpp"

namespace {

agebranch::ModelSpec base_spec() {
  agebranch::ModelSpec s;
  s.alpha = agebranch::RateFunction::constant(2.0);
  s.offspring.kind = agebranch::OffspringLaw::Kind::deterministic;
  s.offspring.n.c = 1.0;
  s.lifetime.kind = agebranch::LifetimeDist::Kind::exponential;
  s.lifetime.a = 1.0;
  return s;
}

void bm_malthusian(benchmark::State& state) {
  const auto spec = base_spec();
  for (auto _ : state)
    benchmark::DoNotOptimize(agebranch::malthusian(spec).alpha_tilde);
}
BENCHMARK(bm_malthusian);

void bm_mean_measure(benchmark::State& state) {
  auto spec = base_spec();
  spec.numerics.T = state.range(0);
  const auto sol = agebranch::malthusian(spec);
  for (auto _ : state)
    benchmark::DoNotOptimize(agebranch::mean_measure(spec, sol).M.back());
}
BENCHMARK(bm_mean_measure)->Arg(6)->Arg(12);

void bm_second_moment(benchmark::State& state) {
  auto spec = base_spec();
  spec.numerics.T = 6.0;
  const auto sol = agebranch::malthusian(spec);
  for (auto _ : state) {
    auto grid = agebranch::mean_measure(spec, sol);
    agebranch::second_moment(spec, sol, grid);
    benchmark::DoNotOptimize(grid.Gamma.back());
  }
}
BENCHMARK(bm_second_moment);

void bm_extinction_curve(benchmark::State& state) {
  auto spec = base_spec();
  spec.numerics.T = 6.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(agebranch::extinction_curve(spec).q_curve.back());
}
BENCHMARK(bm_extinction_curve);

void bm_laplace_march(benchmark::State& state) {
  auto spec = base_spec();
  spec.numerics.T = 6.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(agebranch::march_laplace(spec, 1e-3).L.back());
}
BENCHMARK(bm_laplace_march);

void bm_trajectory(benchmark::State& state) {
  const auto spec = base_spec();
  const std::vector<double> obs = {double(state.range(0))};
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        agebranch::simulate_trajectory(spec, 42, i++, obs, 1000000).total_created);
}
BENCHMARK(bm_trajectory)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
