// Serial reference gradient (forward-mode duals, one thread) against the
// closed-form OpenMP kernel on the recovery-sized dataset.

#include <benchmark/benchmark.h>

#include <vector>

#include "gpmix/kernels.hpp"
#include "gpmix/simulate.hpp"

namespace {

const gpmix::SimulationResult& dataset() {
  static const gpmix::SimulationResult sim =
      gpmix::simulate_dataset(gpmix::reference_parameters(), gpmix::recovery_design(11));
  return sim;
}

void run_gradient(benchmark::State& state, gpmix::Execution exec) {
  const auto& sim = dataset();
  const gpmix::MptModel model(sim.trials, false, {}, exec);
  std::vector<double> grad(model.dim());
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.log_density(sim.truth.coordinates, grad));
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(sim.trials.size()));
}

void BM_GradientSerial(benchmark::State& state) { run_gradient(state, gpmix::Execution::Serial); }
void BM_GradientParallel(benchmark::State& state) { run_gradient(state, gpmix::Execution::Parallel); }

void BM_PointwiseLoglik(benchmark::State& state) {
  const auto& sim = dataset();
  const gpmix::MptModel model(sim.trials, false);
  std::vector<double> out(model.n_obs());
  for (auto _ : state) {
    model.pointwise_loglik(sim.truth.coordinates, out);
    benchmark::ClobberMemory();
  }
}

}  // namespace

BENCHMARK(BM_GradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PointwiseLoglik)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
