#pragma once

#include <cstdint>
#include <vector>

#include "latentfuse/image.hpp"
#include "latentfuse/model.hpp"
#include "latentfuse/rng.hpp"
#include "latentfuse/tensor.hpp"

namespace lftest {

using latentfuse::Shape;
using latentfuse::SplitMix64;
using latentfuse::Tensor;

template <typename T = double>
Tensor<T> random_tensor(SplitMix64& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool grad = false) {
    std::vector<T> data(latentfuse::shape_size(shape));
    for (auto& x : data) x = static_cast<T>(rng.uniform(lo, hi));
    return Tensor<T>(std::move(shape), std::move(data), grad);
}

inline latentfuse::Image random_image(SplitMix64& rng, std::size_t c, std::size_t side) {
    latentfuse::Image img(c, side, side);
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
    return img;
}

inline latentfuse::BinaryMask random_mask(SplitMix64& rng, std::size_t side, double p = 0.5) {
    latentfuse::BinaryMask m(side, side);
    for (auto& v : m.values) v = rng.bernoulli(p) ? 1 : 0;
    return m;
}

// A sample with random images: one satellite view and `street` street views.
inline latentfuse::PreparedSample random_sample(SplitMix64& rng, std::size_t street, std::size_t channels,
                                                std::size_t side) {
    latentfuse::PreparedSample s;
    s.id = "s" + std::to_string(rng.next() % 100000);
    for (std::size_t v = 0; v <= street; ++v) s.views.push_back(random_image(rng, channels, side));
    for (auto& e : s.elements) e = rng.bernoulli(0.5) ? 1 : 0;
    for (auto& m : s.materials) m = rng.bernoulli(0.5) ? 1 : 0;
    return s;
}

template <typename T>
latentfuse::Batch<T> batch_of(const std::vector<latentfuse::PreparedSample>& samples,
                              const latentfuse::TokenizerConfig& config) {
    std::vector<const latentfuse::PreparedSample*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    return latentfuse::make_batch<T>(ptrs, config);
}

template <typename T>
latentfuse::Batch<T> batch_of(const latentfuse::PreparedSample& sample, const latentfuse::TokenizerConfig& config) {
    const latentfuse::PreparedSample* p = &sample;
    return latentfuse::make_batch<T>(std::span<const latentfuse::PreparedSample* const>(&p, 1), config);
}

template <typename T>
Tensor<T> bce_joint(const latentfuse::HeadLogits<T>& logits, const latentfuse::Batch<T>& batch) {
    const auto le = latentfuse::bce_with_logits(logits.elements, batch.targets_elements);
    const auto lm = latentfuse::bce_with_logits(logits.materials, batch.targets_materials);
    return latentfuse::add(latentfuse::scale(le, T(0.5)), latentfuse::scale(lm, T(0.5)));
}

} // namespace lftest
