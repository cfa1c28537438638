// Serial reference versus OpenMP kernels for the three parallel hot spots.
#include "ivlate/bootstrap.hpp"
#include "ivlate/estimators.hpp"
#include "ivlate/montecarlo.hpp"
#include "ivlate/verify.hpp"

#include <benchmark/benchmark.h>

namespace {

const ivlate::DgpSpec& fixture() {
    static const ivlate::DgpSpec dgp = ivlate::monte_carlo_fixtures()[1];
    return dgp;
}

const ivlate::Sample& sample() {
    static const ivlate::Sample s = ivlate::draw_sample_serial(fixture(), 5000, 1);
    return s;
}

double riv(const ivlate::Sample& s) {
    return ivlate::estimate_beta_riv(s, ivlate::build_cells(s, s.covariate_names())).estimate;
}

void BM_BootstrapSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(ivlate::bootstrap_se_serial(sample(), riv, {500, 3}).se);
}
void BM_BootstrapParallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(ivlate::bootstrap_se(sample(), riv, {500, 3}).se);
}

void BM_DrawSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(ivlate::draw_sample_serial(fixture(), n, 7).size());
}
void BM_DrawParallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(ivlate::draw_sample(fixture(), n, 7).size());
}

void BM_MonteCarloSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(ivlate::run_monte_carlo_serial(fixture(), 20000, 32, 1).estimators[0].mean);
}
void BM_MonteCarloParallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(ivlate::run_monte_carlo(fixture(), 20000, 32, 1).estimators[0].mean);
}

} // namespace

BENCHMARK(BM_BootstrapSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BootstrapParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DrawSerial)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DrawParallel)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarloSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarloParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
