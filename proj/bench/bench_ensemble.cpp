// Serial reference against the OpenMP replica kernel on one ensemble workload.

#include "latticespin/kernels.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace latticespin;

namespace {

SpinChainModel bench_model(std::size_t n) {
    return {LocalDrift::cubic(1.0, 1.0, {1.0, 1.0, 3.0, 1.0}), CouplingCoefficients::constant(0.2, 0.2), n};
}

void run(benchmark::State& state, Backend backend) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto replicas = static_cast<std::size_t>(state.range(1));
    const auto model = bench_model(n);
    const std::vector<double> x0(n, 0.5), times{1.0};
    EnsembleOptions o;
    o.h = 0.01;
    o.backend = backend;
    for (auto _ : state) {
        auto snap = run_snapshots(model, x0, times, replicas, 1, o);
        benchmark::DoNotOptimize(snap.values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(replicas * 100));
    state.counters["threads"] = backend == Backend::openmp ? available_threads() : 1;
}

void serial(benchmark::State& state) { run(state, Backend::serial); }
void openmp(benchmark::State& state) { run(state, Backend::openmp); }

} // namespace

BENCHMARK(serial)->Args({8, 4096})->Args({32, 4096})->Unit(benchmark::kMillisecond);
BENCHMARK(openmp)->Args({8, 4096})->Args({32, 4096})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
