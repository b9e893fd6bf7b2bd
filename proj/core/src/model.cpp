#include "latentfuse/model.hpp"

#include <algorithm>

namespace latentfuse {

ModelKind parse_model_kind(std::string_view name) {
    if (name == "satellite") return ModelKind::satellite;
    if (name == "street") return ModelKind::street;
    if (name == "concat") return ModelKind::concat;
    if (name == "fvt") return ModelKind::fvt;
    if (name == "perceiver") return ModelKind::perceiver;
    throw ConfigurationError("unknown model kind '" + std::string(name) + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::satellite: return "satellite";
        case ModelKind::street: return "street";
        case ModelKind::concat: return "concat";
        case ModelKind::fvt: return "fvt";
        case ModelKind::perceiver: return "perceiver";
    }
    return "?";
}

template <typename T>
Tensor<T> Batch<T>::view_patches(std::size_t first, std::size_t count) const {
    const std::size_t views = street_views + 1;
    if (count == 0 || first + count > views) {
        throw ContractError("view_patches: views [" + std::to_string(first) + ", " + std::to_string(first + count) +
                            ") outside a batch with " + std::to_string(views) + " views");
    }
    const std::size_t per_view = patches_per_view * patch_dim;
    std::vector<T> data(size * count * per_view);
    for (std::size_t s = 0; s < size; ++s) {
        auto src = patches.begin() + (s * views + first) * per_view;
        std::copy_n(src, count * per_view, data.begin() + s * count * per_view);
    }
    return Tensor<T>({size * count * patches_per_view, patch_dim}, std::move(data));
}

template <typename T>
Batch<T> make_batch(std::span<const PreparedSample* const> samples, const TokenizerConfig& config,
                    const Augmentation& augmentation, SplitMix64* rng) {
    if (samples.empty()) throw ContractError("make_batch: no samples");
    const std::size_t n = samples.front()->street_views();
    for (const auto* s : samples) {
        if (s->views.empty()) throw ContractError("make_batch: sample '" + s->id + "' has no satellite view");
        if (s->street_views() != n) throw ContractError("make_batch: samples have different street-view counts");
    }

    Batch<T> batch;
    batch.size = samples.size();
    batch.street_views = n;
    batch.patches_per_view = config.patches_per_view();
    batch.patch_dim = config.patch_dim();
    const std::size_t per_view = batch.patches_per_view * batch.patch_dim;
    batch.patches.resize(batch.size * (n + 1) * per_view);

    std::vector<float> scratch(per_view);
    std::vector<T> te(batch.size * kElementClasses);
    std::vector<T> tm(batch.size * kMaterialClasses);
    for (std::size_t s = 0; s < batch.size; ++s) {
        const PreparedSample& sample = *samples[s];
        for (std::size_t v = 0; v <= n; ++v) {
            const Image& img = sample.views[v];
            if (img.channels != config.channels || img.height != config.image_size || img.width != config.image_size) {
                throw ConfigurationError("sample '" + sample.id + "' view " + std::to_string(v) + " is " +
                                         std::to_string(img.channels) + "x" + std::to_string(img.height) + "x" +
                                         std::to_string(img.width) + ", model expects " +
                                         std::to_string(config.channels) + "x" + std::to_string(config.image_size) +
                                         "x" + std::to_string(config.image_size));
            }
            bool flip = false;
            float gain = 1.0f;
            if (augmentation.enabled && rng != nullptr) {
                flip = rng->bernoulli(augmentation.flip_probability);
                gain = static_cast<float>(
                    rng->uniform(1.0 - augmentation.brightness_jitter, 1.0 + augmentation.brightness_jitter));
            }
            patchify_into(img, config.patch_size, scratch, flip, gain);
            std::copy(scratch.begin(), scratch.end(), batch.patches.begin() + (s * (n + 1) + v) * per_view);
        }
        for (std::size_t c = 0; c < kElementClasses; ++c) te[s * kElementClasses + c] = T(sample.elements[c]);
        for (std::size_t c = 0; c < kMaterialClasses; ++c) tm[s * kMaterialClasses + c] = T(sample.materials[c]);
    }
    batch.targets_elements = Tensor<T>({batch.size, kElementClasses}, std::move(te));
    batch.targets_materials = Tensor<T>({batch.size, kMaterialClasses}, std::move(tm));
    return batch;
}

template struct Batch<float>;
template struct Batch<double>;
template Batch<float> make_batch<float>(std::span<const PreparedSample* const>, const TokenizerConfig&,
                                        const Augmentation&, SplitMix64*);
template Batch<double> make_batch<double>(std::span<const PreparedSample* const>, const TokenizerConfig&,
                                          const Augmentation&, SplitMix64*);

} // namespace latentfuse
