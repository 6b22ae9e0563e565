// Serial reference vs OpenMP kernels: offset-table build and batch queries.

#include <benchmark/benchmark.h>

#include "counterpools/pool.hpp"
#include "counterpools/sketch.hpp"
#include "counterpools/workload.hpp"

using namespace counterpools;

namespace {

void BM_OffsetTableBuild(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
    const SnbTable ranks(64, 4);
    for (auto _ : state) {
        OffsetTable table(presets::k64_4_0_1, ranks, exec);
        benchmark::DoNotOptimize(table.size());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(snb(64, 4)));
    state.SetLabel(exec == Execution::Serial ? "serial" : "parallel");
}
BENCHMARK(BM_OffsetTableBuild)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_PooledBatchQuery(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
    static const auto keys = generate_zipf({1.0, uint64_t{1} << 24, 1'000'000, 1});
    static const PooledSketch sketch = [] {
        PooledSketch s(SketchOptions{256 * 1024, 4, presets::k64_4_0_1, FailureStrategy::merge(), 1});
        for (uint64_t k : keys) s.update(k);
        return s;
    }();
    std::vector<uint64_t> out(keys.size());
    for (auto _ : state) {
        sketch.query_batch(keys, out, exec);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(keys.size()));
    state.SetLabel(exec == Execution::Serial ? "serial" : "parallel");
}
BENCHMARK(BM_PooledBatchQuery)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FixedBatchQuery(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
    static const auto keys = generate_zipf({1.0, uint64_t{1} << 24, 1'000'000, 1});
    static const FixedSketch sketch = [] {
        FixedSketch s(256 * 1024, 4, 1);
        for (uint64_t k : keys) s.update(k);
        return s;
    }();
    std::vector<uint64_t> out(keys.size());
    for (auto _ : state) {
        sketch.query_batch(keys, out, exec);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(keys.size()));
    state.SetLabel(exec == Execution::Serial ? "serial" : "parallel");
}
BENCHMARK(BM_FixedBatchQuery)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
