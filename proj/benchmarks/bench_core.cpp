#include <benchmark/benchmark.h>

#include <vector>

#include "latentfuse/metrics.hpp"
#include "latentfuse/rng.hpp"
#include "latentfuse/tensor.hpp"

using namespace latentfuse;

namespace {

Tensor<float> random_tensor(SplitMix64& rng, Shape shape, bool grad = false) {
    std::vector<float> data(shape_size(shape));
    for (auto& x : data) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return Tensor<float>(std::move(shape), std::move(data), grad);
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    SplitMix64 rng(1);
    const auto a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
    NoGradScope<float> no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * std::int64_t(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    SplitMix64 rng(2);
    auto a = random_tensor(rng, {n, n}, true), b = random_tensor(rng, {n, n}, true);
    for (auto _ : state) {
        a.zero_grad();
        b.zero_grad();
        Tape<float> tape;
        tape.backward(sum(matmul(a, b)));
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(256);

void BM_Attention(benchmark::State& state) {
    const auto tokens = static_cast<std::size_t>(state.range(0));
    SplitMix64 rng(3);
    const auto q = random_tensor(rng, {16, 64}), k = random_tensor(rng, {tokens, 64}), v = random_tensor(rng, {tokens, 64});
    NoGradScope<float> no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(scaled_dot_product_attention(q, k, v, 4).output);
}
BENCHMARK(BM_Attention)->Arg(16)->Arg(144);

void BM_AveragePrecision(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    SplitMix64 rng(4);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.bernoulli(0.3);
    }
    for (auto _ : state) benchmark::DoNotOptimize(average_precision(scores, labels));
    state.SetItemsProcessed(state.iterations() * std::int64_t(n));
}
BENCHMARK(BM_AveragePrecision)->Arg(1000)->Arg(100000);

} // namespace
