#include <benchmark/benchmark.h>

#include "mcal/macro.hpp"
#include "mcal/microsim.hpp"
#include "mcal/sensing.hpp"

using namespace mcal;

static void BM_IdmAcceleration(benchmark::State& state) {
  const ParameterSet p = ParameterSet::ground_truth();
  double v = 20.0, s = 30.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(idm_acceleration(v, 0.5, s, true, p));
    v = v < 30.0 ? v + 1e-6 : 20.0;  // defeat constant folding
  }
}
BENCHMARK(BM_IdmAcceleration);

static void BM_SimulationStep(benchmark::State& state) {
  ScenarioConfig sc = build_synthetic_merge();
  Simulation sim(sc, ParameterSet::ground_truth());
  // Warm up to a loaded corridor, then measure steady-state stepping.
  for (int i = 0; i < 2400; ++i) sim.step();
  for (auto _ : state) sim.step();
  state.counters["vehicles"] = static_cast<double>(sim.vehicles().size());
}
BENCHMARK(BM_SimulationStep);

static void BM_FullRun(benchmark::State& state) {
  ScenarioConfig sc = build_synthetic_merge();
  sc.horizon = static_cast<double>(state.range(0));
  sc.demand.bin_width = sc.horizon;
  for (auto _ : state)
    benchmark::DoNotOptimize(run(sc, ParameterSet::ground_truth()));
}
BENCHMARK(BM_FullRun)->Arg(120)->Arg(480)->Unit(benchmark::kMillisecond);

static void BM_EdieFields(benchmark::State& state) {
  const ScenarioConfig sc = build_synthetic_merge();
  const TrajectoryLog log = run(sc, ParameterSet::ground_truth());
  const GridSpec grid{sc.network.length, sc.horizon, 10.0, 10.0};
  for (auto _ : state)
    benchmark::DoNotOptimize(edie_fields(log, grid, sc.network));
  state.SetLabel(std::to_string(log.vehicles.size()) + " vehicles");
}
BENCHMARK(BM_EdieFields)->Unit(benchmark::kMillisecond);

static void BM_AsmReconstruct(benchmark::State& state) {
  const ScenarioConfig sc = build_synthetic_merge();
  const TrajectoryLog log = run(sc, ParameterSet::ground_truth());
  const MeasurementGrid obs = simulate_detectors(log, sc.detectors);
  const GridSpec grid{sc.network.length, sc.horizon,
                      static_cast<double>(state.range(0)), 10.0};
  for (auto _ : state)
    benchmark::DoNotOptimize(asm_reconstruct(obs, grid, AsmParams::defaults_for(obs)));
}
BENCHMARK(BM_AsmReconstruct)->Arg(50)->Arg(10)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
