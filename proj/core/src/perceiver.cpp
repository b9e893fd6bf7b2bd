#include "latentfuse/perceiver.hpp"

#include <algorithm>

namespace latentfuse {

void PerceiverConfig::validate() const {
    if (num_latents == 0) throw ConfigurationError("perceiver: N_z must be >= 1");
    if (latent_dim == 0) throw ConfigurationError("perceiver: D_z must be >= 1");
    if (input_dim == 0) throw ConfigurationError("perceiver: token dimension must be >= 1");
    if (blocks > 0) {
        if (layers == 0) throw ConfigurationError("perceiver: L must be >= 1 when B >= 1");
        if (mlp_ratio == 0) throw ConfigurationError("perceiver: mlp_ratio must be >= 1");
        if (heads_latent == 0 || latent_dim % heads_latent != 0) {
            throw ConfigurationError("perceiver: D_z=" + std::to_string(latent_dim) + " not divisible by " +
                                     std::to_string(heads_latent) + " latent heads");
        }
    }
}

template <typename T>
PerceiverFusion<T>::PerceiverFusion(Initializer& init, const PerceiverConfig& config) : config_(config) {
    config_.validate();
    const std::size_t dz = config_.latent_dim;
    latents_ = init.normal<T>({config_.num_latents, dz});
    encoder_ = CrossAttention<T>(init, dz, config_.input_dim, dz, dz);
    if (config_.blocks > 0) {
        for (std::size_t l = 0; l < config_.layers; ++l)
            layers_.emplace_back(init, dz, config_.heads_latent, config_.mlp_ratio);
    }
    output_query_ = init.normal<T>({1, dz});
    decoder_ = CrossAttention<T>(init, dz, dz, dz, config_.output_dim());
    heads_ = ClassifierHeads<T>(init, config_.output_dim());
}

template <typename T>
AttentionOutput<T> PerceiverFusion<T>::encode(const Tensor<T>& tokens) const {
    return encoder_.forward(latents_, tokens);
}

template <typename T>
Tensor<T> PerceiverFusion<T>::refine(const Tensor<T>& latents, std::vector<Tensor<T>>* weights) const {
    Tensor<T> z = latents;
    for (std::size_t b = 0; b < config_.blocks; ++b) {
        for (const auto& layer : layers_) {
            auto out = layer.forward(z);
            z = out.x;
            if (weights) weights->push_back(out.attention);
        }
    }
    return z;
}

template <typename T>
AttentionOutput<T> PerceiverFusion<T>::decode(const Tensor<T>& latents) const {
    return decoder_.forward(output_query_, latents);
}

template <typename T>
PerceiverOutput<T> PerceiverFusion<T>::forward(const TokenSequence<T>& seq) const {
    if (!seq.tokens.defined() || seq.meta.empty()) {
        throw ContractError("perceiver_forward: empty token sequence (the satellite view must always be present)");
    }
    const bool batched = seq.tokens.rank() == 3;
    if (!batched && seq.tokens.rank() != 2) {
        throw DimensionError("perceiver_forward: tokens must be [T, D] or [B, T, D], got " +
                             shape_string(seq.tokens.shape()));
    }
    if (seq.tokens.shape().back() != config_.input_dim) {
        throw ConfigurationError("perceiver_forward: token width " + std::to_string(seq.tokens.shape().back()) +
                                 " does not match configured D=" + std::to_string(config_.input_dim));
    }
    const Tensor<T> tokens =
        batched ? seq.tokens : reshape(seq.tokens, Shape{1, seq.tokens.dim(0), seq.tokens.dim(1)});
    if (tokens.dim(1) != seq.meta.size()) {
        throw DimensionError("perceiver_forward: " + std::to_string(tokens.dim(1)) + " tokens but " +
                             std::to_string(seq.meta.size()) + " metadata entries");
    }
    const std::size_t batch = tokens.dim(0);

    PerceiverOutput<T> out;
    auto enc = encode(tokens);
    out.encoded_latents = enc.output;
    out.refined_latents = refine(enc.output, &out.trace.self);
    auto dec = decode(out.refined_latents);
    out.embedding = reshape(dec.output, Shape{batch, config_.output_dim()});
    out.logits = heads_(out.embedding);
    if (!batched) {
        out.logits.elements = reshape(out.logits.elements, Shape{kElementClasses});
        out.logits.materials = reshape(out.logits.materials, Shape{kMaterialClasses});
    }
    out.trace.encoder = enc.weights;
    out.trace.decoder = dec.weights;
    out.trace.expected_self = config_.blocks * config_.layers;
    out.trace.meta = seq.meta;
    return out;
}

template <typename T>
void PerceiverFusion<T>::collect(ParameterList<T>& list, const std::string& prefix) const {
    list.add(prefix + ".latents", latents_, ParamGroup::heads);
    encoder_.collect(list, prefix + ".encoder", ParamGroup::heads);
    for (std::size_t l = 0; l < layers_.size(); ++l)
        layers_[l].collect(list, prefix + ".latent_layer" + std::to_string(l), ParamGroup::heads);
    list.add(prefix + ".output_query", output_query_, ParamGroup::heads);
    decoder_.collect(list, prefix + ".decoder", ParamGroup::heads);
    heads_.collect(list, prefix + ".heads");
}

template <typename T>
std::vector<double> rollout_tokens(const AttentionTrace<T>& trace, std::size_t sample) {
    if (!trace.encoder.defined()) throw ContractError("attention_rollout: trace has no encoder attention");
    if (!trace.decoder.defined()) throw ContractError("attention_rollout: trace has no decoder attention");
    if (trace.self.size() != trace.expected_self) {
        throw ContractError("attention_rollout: trace has " + std::to_string(trace.self.size()) +
                            " self-attention maps, expected " + std::to_string(trace.expected_self));
    }
    const auto& enc = trace.encoder;  // [B, 1, Nz, T]
    if (enc.rank() != 4 || sample >= enc.dim(0)) throw ContractError("attention_rollout: sample outside trace");
    const std::size_t nz = enc.dim(2);
    const std::size_t ntok = enc.dim(3);

    std::vector<double> m(nz);
    {
        auto dec = trace.decoder.data();  // [B, 1, 1, Nz]
        for (std::size_t j = 0; j < nz; ++j) m[j] = static_cast<double>(dec[sample * nz + j]);
    }
    std::vector<double> mixed(nz * nz);
    std::vector<double> next(nz);
    for (std::size_t l = trace.self.size(); l-- > 0;) {
        const auto& w = trace.self[l];  // [B, h, Nz, Nz]
        const std::size_t heads = w.dim(1);
        auto wd = w.data();
        std::fill(mixed.begin(), mixed.end(), 0.0);
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t base = (sample * heads + h) * nz * nz;
            for (std::size_t i = 0; i < nz * nz; ++i) mixed[i] += static_cast<double>(wd[base + i]) / double(heads);
        }
        for (std::size_t i = 0; i < nz; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < nz; ++j) {
                double& x = mixed[i * nz + j];
                x = 0.5 * x + (i == j ? 0.5 : 0.0);
                row += x;
            }
            for (std::size_t j = 0; j < nz; ++j) mixed[i * nz + j] /= row;
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < nz; ++i)
            for (std::size_t j = 0; j < nz; ++j) next[j] += m[i] * mixed[i * nz + j];
        m.swap(next);
    }
    std::vector<double> r(ntok, 0.0);
    auto ed = enc.data();
    for (std::size_t i = 0; i < nz; ++i) {
        const std::size_t base = (sample * nz + i) * ntok;
        for (std::size_t t = 0; t < ntok; ++t) r[t] += m[i] * static_cast<double>(ed[base + t]);
    }
    double total = 0.0;
    for (double x : r) total += x;
    for (double& x : r) x /= total;
    return r;
}

template <typename T>
std::vector<double> attention_rollout(const AttentionTrace<T>& trace, std::size_t sample) {
    const auto tokens = rollout_tokens(trace, sample);
    if (trace.meta.size() != tokens.size()) {
        throw ContractError("attention_rollout: token metadata does not match the traced sequence");
    }
    std::size_t views = 0;
    for (const auto& m : trace.meta) views = std::max(views, m.view_index + 1);
    std::vector<double> importance(views, 0.0);
    for (std::size_t t = 0; t < tokens.size(); ++t) importance[trace.meta[t].view_index] += tokens[t];
    double total = 0.0;
    for (double x : importance) total += x;
    for (double& x : importance) x /= total;
    return importance;
}

template <typename T>
PerceiverClassifier<T>::PerceiverClassifier(std::uint64_t seed, const TokenizerConfig& tokenizer,
                                            const PerceiverConfig& config)
    : Classifier<T>(tokenizer) {
    if (config.input_dim != tokenizer.dim) {
        throw ConfigurationError("perceiver: token dimension " + std::to_string(config.input_dim) +
                                 " differs from tokenizer output " + std::to_string(tokenizer.dim));
    }
    Initializer init(seed);
    tokenizer_ = PatchTokenizer<T>(init, tokenizer);
    embeddings_ = EmbeddingTables<T>(init, tokenizer.grid_side(), tokenizer.dim);
    fusion_ = PerceiverFusion<T>(init, config);
    tokenizer_.collect(this->params_, "tokenizer");
    embeddings_.collect(this->params_, "embed");
    fusion_.collect(this->params_, "perceiver");
}

template <typename T>
TokenSequence<T> PerceiverClassifier<T>::token_sequence(const Batch<T>& batch) const {
    const std::size_t views = batch.street_views + 1;
    const Tensor<T> flat = tokenizer_.project(batch.all_patches());
    TokenSequence<T> seq;
    seq.tokens = reshape(flat, Shape{batch.size, views * batch.patches_per_view, this->tokenizer_config_.dim});
    seq.meta = token_layout(batch.street_views, this->tokenizer_config_.grid_side());
    return augment_tokens(seq, embeddings_);
}

template <typename T>
PerceiverOutput<T> PerceiverClassifier<T>::forward_with_trace(const Batch<T>& batch) const {
    return fusion_.forward(token_sequence(batch));
}

template <typename T>
std::vector<std::uint32_t> PerceiverClassifier<T>::config_fields() const {
    const auto& t = this->tokenizer_config_;
    const auto& c = fusion_.config();
    auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
    return {u(t.image_size),   u(t.patch_size), u(t.channels),         u(t.dim),
            u(c.num_latents),  u(c.latent_dim), u(c.blocks),           u(c.layers),
            u(c.output_dim()), u(c.mlp_ratio),  u(c.heads_latent)};
}

template class PerceiverFusion<float>;
template class PerceiverFusion<double>;
template class PerceiverClassifier<float>;
template class PerceiverClassifier<double>;
template std::vector<double> rollout_tokens<float>(const AttentionTrace<float>&, std::size_t);
template std::vector<double> rollout_tokens<double>(const AttentionTrace<double>&, std::size_t);
template std::vector<double> attention_rollout<float>(const AttentionTrace<float>&, std::size_t);
template std::vector<double> attention_rollout<double>(const AttentionTrace<double>&, std::size_t);

} // namespace latentfuse
