#pragma once

// Comparison architectures. Every baseline reduces each view to one global
// feature vector, the mean of its projected patch tokens, and fuses at that
// level instead of at the token level.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "latentfuse/layers.hpp"
#include "latentfuse/model.hpp"
#include "latentfuse/tokenizer.hpp"

namespace latentfuse {

enum class PoolingMode { max, mean, attention };

PoolingMode parse_pooling_mode(std::string_view name);
std::string to_string(PoolingMode mode);

// Mean-pooled tokens of views [first, first + count): [B, count, D].
template <typename T>
Tensor<T> view_features(const PatchTokenizer<T>& tokenizer, const Batch<T>& batch, std::size_t first,
                        std::size_t count);

// features [B, V, D] -> [B, D]. Attention mode weights views by
// softmax(scorer . f / sqrt(D)) with a learned scorer [1, D].
template <typename T>
Tensor<T> pool_views(const Tensor<T>& features, PoolingMode mode, const Tensor<T>* scorer = nullptr);

// List form over single feature vectors [D]. Throws ContractError when empty.
template <typename T>
Tensor<T> pool_views(std::span<const Tensor<T>> features, PoolingMode mode, const Tensor<T>* scorer = nullptr);

// Satellite-only or street-only model (magic LFU1).
template <typename T>
class UnimodalModel final : public Classifier<T> {
public:
    UnimodalModel(std::uint64_t seed, const TokenizerConfig& tokenizer, ModelKind branch,
                  PoolingMode pooling = PoolingMode::max);

    ModelKind kind() const override { return branch_; }
    // Street branch throws ContractError for batches with no street views.
    HeadLogits<T> forward(const Batch<T>& batch) const override;
    Tensor<T> embed(const Batch<T>& batch) const;

    std::array<char, 4> magic() const override { return {'L', 'F', 'U', '1'}; }
    std::vector<std::uint32_t> config_fields() const override;

    PoolingMode pooling() const { return pooling_; }
    const PatchTokenizer<T>& tokenizer() const { return tokenizer_; }
    const ClassifierHeads<T>& heads() const { return heads_; }

private:
    ModelKind branch_;
    PoolingMode pooling_;
    PatchTokenizer<T> tokenizer_;
    Tensor<T> scorer_;  // [1, D], street branch with attention pooling only
    ClassifierHeads<T> heads_;
};

// heads([satellite ; pooled street or placeholder]) (magic LFC1).
template <typename T>
class ConcatModel final : public Classifier<T> {
public:
    ConcatModel(std::uint64_t seed, const TokenizerConfig& tokenizer, PoolingMode pooling = PoolingMode::max);

    ModelKind kind() const override { return ModelKind::concat; }
    HeadLogits<T> forward(const Batch<T>& batch) const override;
    Tensor<T> fused(const Batch<T>& batch) const;  // [B, 2D]

    std::array<char, 4> magic() const override { return {'L', 'F', 'C', '1'}; }
    std::vector<std::uint32_t> config_fields() const override;

    const Tensor<T>& placeholder() const { return placeholder_; }
    const PatchTokenizer<T>& tokenizer() const { return tokenizer_; }
    const ClassifierHeads<T>& heads() const { return heads_; }

private:
    PoolingMode pooling_;
    PatchTokenizer<T> tokenizer_;
    Tensor<T> placeholder_;  // [D], stands in for the street half when N = 0
    Tensor<T> scorer_;
    ClassifierHeads<T> heads_;
};

struct FVTConfig {
    std::size_t layers = 1;
    std::size_t heads = 8;
    std::size_t mlp_ratio = 4;

    void validate(std::size_t dim) const;
};

// Transformer over [CLS, satellite, street_1..street_N] feature vectors with
// modality embeddings only, classified from the CLS position (magic LFT1).
template <typename T>
class FvtModel final : public Classifier<T> {
public:
    FvtModel(std::uint64_t seed, const TokenizerConfig& tokenizer, const FVTConfig& config);

    ModelKind kind() const override { return ModelKind::fvt; }
    HeadLogits<T> forward(const Batch<T>& batch) const override;

    // Input sequence [B, N + 2, D] before the encoder.
    Tensor<T> sequence(const Batch<T>& batch) const;
    Tensor<T> encode(const Tensor<T>& sequence) const;  // -> CLS output [B, D]

    std::array<char, 4> magic() const override { return {'L', 'F', 'T', '1'}; }
    std::vector<std::uint32_t> config_fields() const override;

    const FVTConfig& config() const { return config_; }
    const Tensor<T>& cls() const { return cls_; }
    const Tensor<T>& modality() const { return modality_; }
    const std::vector<TransformerLayer<T>>& layers() const { return layers_; }
    const ClassifierHeads<T>& heads() const { return heads_; }

private:
    FVTConfig config_;
    PatchTokenizer<T> tokenizer_;
    Tensor<T> cls_;       // [1, D]
    Tensor<T> modality_;  // [2, D]
    std::vector<TransformerLayer<T>> layers_;
    ClassifierHeads<T> heads_;
};

} // namespace latentfuse
