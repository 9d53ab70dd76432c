// Parallel kernels against their serial reference transcriptions.

#include <benchmark/benchmark.h>

#include "hdmt/core_tests.hpp"
#include "hdmt/precision.hpp"
#include "hdmt/rng.hpp"
#include "hdmt/simharness.hpp"
#include "reference/naive_stats.hpp"

namespace {

hdmt::TwoSampleData make_data(int n1, int n2, int p) {
  hdmt::SimulationConfig cfg;
  cfg.p = p;
  cfg.n1 = n1;
  cfg.n2 = n2;
  cfg.rho = 0.6;
  cfg.seed = 1;
  return hdmt::gen_two_samples(cfg, 0);
}

void bm_component_stats(benchmark::State& state) {
  const auto d = make_data(40, 40, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto cs = hdmt::component_stats(d, true);
    benchmark::DoNotOptimize(cs.t.data());
  }
}
BENCHMARK(bm_component_stats)->Arg(500)->Arg(2000)->Arg(8000);

void bm_component_stats_serial_ref(benchmark::State& state) {
  const auto d = make_data(40, 40, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    double acc = 0.0;
    for (int k = 0; k < d.p(); ++k) acc += hdmt::ref::t_component(d.x1, d.x2, k);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(bm_component_stats_serial_ref)->Arg(500)->Arg(2000);

void bm_multi_threshold(benchmark::State& state) {
  const auto d = make_data(30, 40, static_cast<int>(state.range(0)));
  const auto cs = hdmt::component_stats(d, true);
  for (auto _ : state) {
    auto m = hdmt::multi_threshold_statistic(cs, 0.05, hdmt::Variant::L2);
    benchmark::DoNotOptimize(m.value);
  }
}
BENCHMARK(bm_multi_threshold)->Arg(200)->Arg(600);

void bm_multi_threshold_serial_ref(benchmark::State& state) {
  const auto d = make_data(30, 40, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto m = hdmt::ref::multi_scan(d, 0.05, false, true);
    benchmark::DoNotOptimize(m.value);
  }
}
BENCHMARK(bm_multi_threshold_serial_ref)->Arg(200)->Arg(600);

void bm_banded_cholesky_fit(benchmark::State& state) {
  const auto d = make_data(30, 40, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto est = hdmt::fit_banded_cholesky(d, 2);
    benchmark::DoNotOptimize(est.omega_hat.data());
  }
}
BENCHMARK(bm_banded_cholesky_fit)->Arg(200)->Arg(600);

void bm_simulation_cell(benchmark::State& state) {
  hdmt::SimulationConfig cfg;
  cfg.p = 200;
  cfg.n1 = 30;
  cfg.n2 = 40;
  cfg.rho = 0.6;
  cfg.replicates = static_cast<int>(state.range(0));
  cfg.tests = {"cq", "mult1", "clx1"};
  cfg.seed = 3;
  for (auto _ : state) {
    auto cell = hdmt::run_size(cfg);
    benchmark::DoNotOptimize(cell.reject_rate.data());
  }
}
BENCHMARK(bm_simulation_cell)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
