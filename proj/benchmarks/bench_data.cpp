#include <benchmark/benchmark.h>

#include <cstdint>

#include "latentfuse/synthetic.hpp"

using namespace latentfuse;

namespace {

void BM_GenerateScene(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(generate_scene(seed++));
}
BENCHMARK(BM_GenerateScene);

void BM_ProjectFootprint(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    SceneSpec spec;
    for (std::uint64_t seed = 0; spec.cameras.empty(); ++seed) spec = generate_scene(seed).first;
    for (auto _ : state) benchmark::DoNotOptimize(project_footprint_mask(spec, 0, size));
    state.SetItemsProcessed(state.iterations() * std::int64_t(size * size));
}
BENCHMARK(BM_ProjectFootprint)->Arg(32)->Arg(128)->Arg(518);

} // namespace
BENCHMARK_MAIN();
