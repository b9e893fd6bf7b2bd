#include <benchmark/benchmark.h>

#include <vector>

#include "latentfuse/checkpoint.hpp"
#include "latentfuse/dataset_io.hpp"
#include "latentfuse/synthetic.hpp"
#include "latentfuse/training.hpp"

using namespace latentfuse;

namespace {

// Sixteen generated buildings with exactly `views` street views each.
std::vector<PreparedSample> samples_with_views(std::size_t views) {
    std::vector<PreparedSample> out;
    for (std::uint64_t seed = 0; out.size() < 16; ++seed) {
        const auto sample = generate_scene(seed).second;
        if (sample.street.size() != views) continue;
        out.push_back(prepare_sample(sample, MaskingStrategy::rgbm, MaskingStrategy::rgbm));
    }
    return out;
}

Batch<float> batch_for(const std::vector<PreparedSample>& samples, const TokenizerConfig& config) {
    std::vector<const PreparedSample*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    return make_batch<float>(ptrs, config);
}

ModelSpec spec_of(ModelKind kind) {
    ModelSpec spec;
    spec.kind = kind;
    spec.tokenizer.channels = 4;
    return spec;
}

void BM_Forward(benchmark::State& state) {
    const auto kind = static_cast<ModelKind>(state.range(0));
    const auto views = static_cast<std::size_t>(state.range(1));
    const auto model = make_classifier<float>(spec_of(kind), 1);
    const auto batch = batch_for(samples_with_views(views), model->tokenizer_config());
    NoGradScope<float> no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(model->forward(batch));
    state.SetLabel(to_string(kind));
    state.SetItemsProcessed(state.iterations() * std::int64_t(batch.size));
}
BENCHMARK(BM_Forward)
    ->ArgsProduct({{int(ModelKind::satellite), int(ModelKind::concat), int(ModelKind::fvt), int(ModelKind::perceiver)},
                   {1, 4, 8}});

void BM_TrainStep(benchmark::State& state) {
    const auto kind = static_cast<ModelKind>(state.range(0));
    auto model = make_classifier<float>(spec_of(kind), 2);
    const auto batch = batch_for(samples_with_views(4), model->tokenizer_config());
    AdamW<float> optimizer(model->parameters());
    for (auto _ : state) {
        model->parameters().zero_grad();
        Tape<float> tape;
        const auto logits = model->forward(batch);
        tape.backward(joint_loss(bce_with_logits(logits.elements, batch.targets_elements),
                                 bce_with_logits(logits.materials, batch.targets_materials)));
        optimizer.step({1e-4, 1e-4});
    }
    state.SetLabel(to_string(kind));
    state.SetItemsProcessed(state.iterations() * std::int64_t(batch.size));
}
BENCHMARK(BM_TrainStep)->Arg(int(ModelKind::concat))->Arg(int(ModelKind::fvt))->Arg(int(ModelKind::perceiver));

} // namespace
