#pragma once

// Shared model plumbing: masked samples ready for tokenization, N-homogeneous
// batches, the two classifier heads and the Classifier interface every
// architecture implements.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latentfuse/layers.hpp"
#include "latentfuse/rng.hpp"
#include "latentfuse/taxonomy.hpp"
#include "latentfuse/tokenizer.hpp"

namespace latentfuse {

enum class ModelKind { satellite, street, concat, fvt, perceiver };

ModelKind parse_model_kind(std::string_view name);
std::string to_string(ModelKind kind);

// A sample after masking: views[0] is the satellite image, views[1..N] the
// street images, all with the same channel count.
struct PreparedSample {
    std::string id;
    std::vector<Image> views;
    std::array<std::uint8_t, kElementClasses> elements{};
    std::array<std::uint8_t, kMaterialClasses> materials{};

    std::size_t street_views() const { return views.empty() ? 0 : views.size() - 1; }
};

struct Augmentation {
    bool enabled = false;
    double flip_probability = 0.5;
    double brightness_jitter = 0.1;  // gain drawn from [1 - j, 1 + j]
};

// Samples sharing one street-view count, patchified.
template <typename T>
struct Batch {
    std::size_t size = 0;
    std::size_t street_views = 0;
    std::size_t patches_per_view = 0;
    std::size_t patch_dim = 0;
    std::vector<T> patches;  // [size][street_views + 1][P][patch_dim]
    Tensor<T> targets_elements;   // [size, 6]
    Tensor<T> targets_materials;  // [size, 7]

    // Patches of views [first, first + count) of every sample:
    // [size * count * P, patch_dim].
    Tensor<T> view_patches(std::size_t first, std::size_t count) const;

    Tensor<T> satellite_patches() const { return view_patches(0, 1); }
    Tensor<T> street_patches() const { return view_patches(1, street_views); }
    Tensor<T> all_patches() const { return view_patches(0, street_views + 1); }
};

// Throws ContractError for an empty selection or mixed street-view counts.
// With augmentation enabled, each view gets an independent horizontal flip
// and brightness gain drawn from rng.
template <typename T>
Batch<T> make_batch(std::span<const PreparedSample* const> samples, const TokenizerConfig& config,
                    const Augmentation& augmentation = {}, SplitMix64* rng = nullptr);

template <typename T>
struct HeadLogits {
    Tensor<T> elements;   // [B, 6] (or [6] for an unbatched sequence)
    Tensor<T> materials;  // [B, 7]
};

// Direct linear heads on a global embedding.
template <typename T>
struct ClassifierHeads {
    Linear<T> elements;
    Linear<T> materials;

    ClassifierHeads() = default;
    ClassifierHeads(Initializer& init, std::size_t dim)
        : elements(init, dim, kElementClasses), materials(init, dim, kMaterialClasses) {}

    HeadLogits<T> operator()(const Tensor<T>& embedding) const {
        return HeadLogits<T>{elements(embedding), materials(embedding)};
    }

    void collect(ParameterList<T>& list, const std::string& prefix) const {
        elements.collect(list, prefix + ".elements", ParamGroup::heads);
        materials.collect(list, prefix + ".materials", ParamGroup::heads);
    }
};

template <typename T>
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual ModelKind kind() const = 0;
    virtual HeadLogits<T> forward(const Batch<T>& batch) const = 0;

    // Checkpoint identity: 4-byte magic and the u32 architecture fields
    // needed to rebuild the model.
    virtual std::array<char, 4> magic() const = 0;
    virtual std::vector<std::uint32_t> config_fields() const = 0;

    const TokenizerConfig& tokenizer_config() const { return tokenizer_config_; }
    ParameterList<T>& parameters() { return params_; }
    const ParameterList<T>& parameters() const { return params_; }

protected:
    explicit Classifier(const TokenizerConfig& config) : tokenizer_config_(config) {}

    TokenizerConfig tokenizer_config_;
    ParameterList<T> params_;
};

} // namespace latentfuse
