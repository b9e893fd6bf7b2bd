#pragma once

// Perceiver IO fusion over satellite and street patch tokens.
//
//   Z_0 = CrossAttn(Z_query; X)                 single head, N_z x D_z
//   Z   = B applications of one shared block of L self-attention sub-layers
//   y   = CrossAttn(q; Z_B)                     single head, q in R^{1 x D_z}
//   logits = linear heads(y)
//
// The sub-layer parameters are shared across the B block applications but
// distinct across the L sub-layers within the block. Nothing after the
// encoder depends on the input length, so any number of street views in
// [0, 8] runs through the same graph without padding.

#include <cstdint>
#include <vector>

#include "latentfuse/layers.hpp"
#include "latentfuse/model.hpp"
#include "latentfuse/tokenizer.hpp"

namespace latentfuse {

struct PerceiverConfig {
    std::size_t num_latents = 16;   // N_z
    std::size_t latent_dim = 64;    // D_z
    std::size_t blocks = 2;         // B
    std::size_t layers = 2;         // L, sub-layers per block
    std::size_t input_dim = 64;     // D
    std::size_t out_dim = 0;        // D_out; 0 means D_z
    std::size_t mlp_ratio = 4;
    std::size_t heads_latent = 4;

    std::size_t output_dim() const { return out_dim == 0 ? latent_dim : out_dim; }
    void validate() const;
};

// Attention weights recorded by one forward pass. Shapes carry the batch
// axis: encoder [B, 1, N_z, T], each self entry [B, h, N_z, N_z], decoder
// [B, 1, 1, N_z]. Self entries are in execution order (block-major).
template <typename T>
struct AttentionTrace {
    Tensor<T> encoder;
    std::vector<Tensor<T>> self;
    Tensor<T> decoder;
    std::size_t expected_self = 0;  // B * L of the producing model
    std::vector<TokenMeta> meta;
};

template <typename T>
struct PerceiverOutput {
    HeadLogits<T> logits;
    AttentionTrace<T> trace;
    Tensor<T> encoded_latents;  // Z_0, [B, N_z, D_z]
    Tensor<T> refined_latents;  // Z_B, [B, N_z, D_z]
    Tensor<T> embedding;        // y, [B, D_out]
};

template <typename T>
class PerceiverFusion {
public:
    PerceiverFusion() = default;
    PerceiverFusion(Initializer& init, const PerceiverConfig& config);

    const PerceiverConfig& config() const { return config_; }

    // seq.tokens is [T, D] or [B, T, D]. Unbatched input yields logits of
    // shape [6] / [7]; batched input [B, 6] / [B, 7].
    PerceiverOutput<T> forward(const TokenSequence<T>& seq) const;

    // Individual stages, exposed for composition checks.
    AttentionOutput<T> encode(const Tensor<T>& tokens) const;                   // [B, T, D] -> [B, N_z, D_z]
    Tensor<T> refine(const Tensor<T>& latents, std::vector<Tensor<T>>* weights = nullptr) const;
    AttentionOutput<T> decode(const Tensor<T>& latents) const;                  // -> [B, 1, D_out]
    HeadLogits<T> classify(const Tensor<T>& embedding) const { return heads_(embedding); }

    const Tensor<T>& latent_queries() const { return latents_; }
    const Tensor<T>& output_query() const { return output_query_; }
    const std::vector<TransformerLayer<T>>& latent_layers() const { return layers_; }

    void collect(ParameterList<T>& list, const std::string& prefix) const;

private:
    PerceiverConfig config_;
    Tensor<T> latents_;  // [N_z, D_z]
    CrossAttention<T> encoder_;
    std::vector<TransformerLayer<T>> layers_;  // L sub-layers, applied B times
    Tensor<T> output_query_;                   // [1, D_z]
    CrossAttention<T> decoder_;
    ClassifierHeads<T> heads_;
};

// Token attribution through the whole network for one sample of the trace:
//   R = A_dec * prod normalize(0.5 * mean_heads(A_self) + 0.5 * I) * A_enc
// with the latest sub-layer nearest the decoder. Returns the normalized
// 1 x T row. Throws ContractError if a stage is missing.
template <typename T>
std::vector<double> rollout_tokens(const AttentionTrace<T>& trace, std::size_t sample = 0);

// rollout_tokens summed over each view's tokens, renormalized to sum 1.
// Index 0 is the satellite view.
template <typename T>
std::vector<double> attention_rollout(const AttentionTrace<T>& trace, std::size_t sample = 0);

// Tokenizer + embeddings + Perceiver fusion, trained end to end.
template <typename T>
class PerceiverClassifier final : public Classifier<T> {
public:
    PerceiverClassifier(std::uint64_t seed, const TokenizerConfig& tokenizer, const PerceiverConfig& config);

    ModelKind kind() const override { return ModelKind::perceiver; }
    HeadLogits<T> forward(const Batch<T>& batch) const override { return forward_with_trace(batch).logits; }
    PerceiverOutput<T> forward_with_trace(const Batch<T>& batch) const;

    // Tokenized and embedded input for a batch.
    TokenSequence<T> token_sequence(const Batch<T>& batch) const;

    std::array<char, 4> magic() const override { return {'L', 'F', 'Z', '1'}; }
    std::vector<std::uint32_t> config_fields() const override;

    const PatchTokenizer<T>& tokenizer() const { return tokenizer_; }
    const EmbeddingTables<T>& embeddings() const { return embeddings_; }
    const PerceiverFusion<T>& fusion() const { return fusion_; }

private:
    PatchTokenizer<T> tokenizer_;
    EmbeddingTables<T> embeddings_;
    PerceiverFusion<T> fusion_;
};

} // namespace latentfuse
