// Sequential reference engine vs the OpenMP engine on the same datasets.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "ibs/engine.hpp"
#include "ibs/models/changeloc.hpp"
#include "ibs/models/orientation.hpp"

namespace {

const std::vector<double> kOrientationTheta = {std::log(2.0), 0.1, 0.1};
const std::vector<double> kChangeLocTheta = {std::log(0.3), 0.1};

ibs::EngineConfig config(const benchmark::State& state) {
  ibs::EngineConfig cfg;
  cfg.repeats = static_cast<int>(state.range(0));
  cfg.record_trials = false;
  return cfg;
}

void BM_OrientationSequential(benchmark::State& state) {
  const ibs::OrientationModel model;
  const auto data = model.generate(600, kOrientationTheta, 1);
  auto cfg = config(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ibs::estimate_sequential(model, data, kOrientationTheta, cfg).loglik);
    ++cfg.master_seed;
  }
}

void BM_OrientationParallel(benchmark::State& state) {
  const ibs::OrientationModel model;
  const auto data = model.generate(600, kOrientationTheta, 1);
  auto cfg = config(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ibs::estimate_parallel(model, data, kOrientationTheta, cfg).loglik);
    ++cfg.master_seed;
  }
}

void BM_ChangeLocSequential(benchmark::State& state) {
  const ibs::ChangeLocModel model;
  const auto data = model.generate(400, kChangeLocTheta, 1);
  auto cfg = config(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ibs::estimate_sequential(model, data, kChangeLocTheta, cfg).loglik);
    ++cfg.master_seed;
  }
}

void BM_ChangeLocParallel(benchmark::State& state) {
  const ibs::ChangeLocModel model;
  const auto data = model.generate(400, kChangeLocTheta, 1);
  auto cfg = config(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ibs::estimate_parallel(model, data, kChangeLocTheta, cfg).loglik);
    ++cfg.master_seed;
  }
}

}  // namespace

BENCHMARK(BM_OrientationSequential)->Arg(1)->Arg(10)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_OrientationParallel)->Arg(1)->Arg(10)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ChangeLocSequential)->Arg(1)->Arg(10)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ChangeLocParallel)->Arg(1)->Arg(10)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
