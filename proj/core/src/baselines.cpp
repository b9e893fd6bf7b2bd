#include "latentfuse/baselines.hpp"

namespace latentfuse {

PoolingMode parse_pooling_mode(std::string_view name) {
    if (name == "max") return PoolingMode::max;
    if (name == "mean") return PoolingMode::mean;
    if (name == "attention") return PoolingMode::attention;
    throw ConfigurationError("unknown pooling mode '" + std::string(name) + "' (expected max, mean or attention)");
}

std::string to_string(PoolingMode mode) {
    switch (mode) {
        case PoolingMode::max: return "max";
        case PoolingMode::mean: return "mean";
        case PoolingMode::attention: return "attention";
    }
    return "?";
}

template <typename T>
Tensor<T> view_features(const PatchTokenizer<T>& tokenizer, const Batch<T>& batch, std::size_t first,
                        std::size_t count) {
    const std::size_t d = tokenizer.config().dim;
    const Tensor<T> tokens = tokenizer.project(batch.view_patches(first, count));
    const Tensor<T> pooled = mean_axis1(reshape(tokens, Shape{batch.size * count, batch.patches_per_view, d}));
    return reshape(pooled, Shape{batch.size, count, d});
}

template <typename T>
Tensor<T> pool_views(const Tensor<T>& features, PoolingMode mode, const Tensor<T>* scorer) {
    if (features.rank() != 3) {
        throw DimensionError("pool_views: expected [B, V, D] features, got " + shape_string(features.shape()));
    }
    switch (mode) {
        case PoolingMode::max: return max_axis1(features);
        case PoolingMode::mean: return mean_axis1(features);
        case PoolingMode::attention: {
            if (scorer == nullptr || !scorer->defined()) {
                throw ConfigurationError("pool_views: attention pooling needs a scoring vector");
            }
            auto att = scaled_dot_product_attention(*scorer, features, features, 1);
            return reshape(att.output, Shape{features.dim(0), features.dim(2)});
        }
    }
    throw ConfigurationError("pool_views: bad mode");
}

template <typename T>
Tensor<T> pool_views(std::span<const Tensor<T>> features, PoolingMode mode, const Tensor<T>* scorer) {
    if (features.empty()) throw ContractError("pool_views: empty view list");
    const std::size_t d = features.front().size();
    std::vector<Tensor<T>> rows;
    rows.reserve(features.size());
    for (const auto& f : features) {
        if (f.size() != d) throw DimensionError("pool_views: feature vectors differ in length");
        rows.push_back(reshape(f, Shape{1, 1, d}));
    }
    const Tensor<T> stacked = concat_axis1(std::span<const Tensor<T>>(rows));
    return reshape(pool_views(stacked, mode, scorer), Shape{d});
}

template <typename T>
UnimodalModel<T>::UnimodalModel(std::uint64_t seed, const TokenizerConfig& tokenizer, ModelKind branch,
                                PoolingMode pooling)
    : Classifier<T>(tokenizer), branch_(branch), pooling_(pooling) {
    if (branch != ModelKind::satellite && branch != ModelKind::street) {
        throw ConfigurationError("unimodal model branch must be satellite or street, got " + to_string(branch));
    }
    Initializer init(seed);
    tokenizer_ = PatchTokenizer<T>(init, tokenizer);
    if (branch_ == ModelKind::street && pooling_ == PoolingMode::attention) {
        scorer_ = init.normal<T>({1, tokenizer.dim});
    }
    heads_ = ClassifierHeads<T>(init, tokenizer.dim);
    tokenizer_.collect(this->params_, "tokenizer");
    if (scorer_.defined()) this->params_.add("pool.scorer", scorer_, ParamGroup::heads);
    heads_.collect(this->params_, "heads");
}

template <typename T>
Tensor<T> UnimodalModel<T>::embed(const Batch<T>& batch) const {
    const std::size_t d = this->tokenizer_config_.dim;
    if (branch_ == ModelKind::satellite) {
        return reshape(view_features(tokenizer_, batch, 0, 1), Shape{batch.size, d});
    }
    if (batch.street_views == 0) {
        throw ContractError("street model needs at least one street view; sample has N=0 street-level images");
    }
    return pool_views(view_features(tokenizer_, batch, 1, batch.street_views), pooling_,
                      scorer_.defined() ? &scorer_ : nullptr);
}

template <typename T>
HeadLogits<T> UnimodalModel<T>::forward(const Batch<T>& batch) const {
    return heads_(embed(batch));
}

template <typename T>
std::vector<std::uint32_t> UnimodalModel<T>::config_fields() const {
    const auto& t = this->tokenizer_config_;
    return {static_cast<std::uint32_t>(t.image_size), static_cast<std::uint32_t>(t.patch_size),
            static_cast<std::uint32_t>(t.channels),   static_cast<std::uint32_t>(t.dim),
            branch_ == ModelKind::street ? 1u : 0u,   static_cast<std::uint32_t>(pooling_)};
}

template <typename T>
ConcatModel<T>::ConcatModel(std::uint64_t seed, const TokenizerConfig& tokenizer, PoolingMode pooling)
    : Classifier<T>(tokenizer), pooling_(pooling) {
    Initializer init(seed);
    tokenizer_ = PatchTokenizer<T>(init, tokenizer);
    placeholder_ = init.normal<T>({tokenizer.dim});
    if (pooling_ == PoolingMode::attention) scorer_ = init.normal<T>({1, tokenizer.dim});
    heads_ = ClassifierHeads<T>(init, 2 * tokenizer.dim);
    tokenizer_.collect(this->params_, "tokenizer");
    this->params_.add("concat.placeholder", placeholder_, ParamGroup::heads);
    if (scorer_.defined()) this->params_.add("pool.scorer", scorer_, ParamGroup::heads);
    heads_.collect(this->params_, "heads");
}

template <typename T>
Tensor<T> ConcatModel<T>::fused(const Batch<T>& batch) const {
    const std::size_t d = this->tokenizer_config_.dim;
    const Tensor<T> sat = reshape(view_features(tokenizer_, batch, 0, 1), Shape{batch.size, d});
    const Tensor<T> street =
        batch.street_views == 0
            ? expand(placeholder_, batch.size)
            : pool_views(view_features(tokenizer_, batch, 1, batch.street_views), pooling_,
                         scorer_.defined() ? &scorer_ : nullptr);
    return concat_last(sat, street);
}

template <typename T>
HeadLogits<T> ConcatModel<T>::forward(const Batch<T>& batch) const {
    return heads_(fused(batch));
}

template <typename T>
std::vector<std::uint32_t> ConcatModel<T>::config_fields() const {
    const auto& t = this->tokenizer_config_;
    return {static_cast<std::uint32_t>(t.image_size), static_cast<std::uint32_t>(t.patch_size),
            static_cast<std::uint32_t>(t.channels), static_cast<std::uint32_t>(t.dim),
            static_cast<std::uint32_t>(pooling_)};
}

void FVTConfig::validate(std::size_t dim) const {
    if (layers == 0) throw ConfigurationError("fvt: L must be >= 1");
    if (mlp_ratio == 0) throw ConfigurationError("fvt: mlp_ratio must be >= 1");
    if (heads == 0 || dim % heads != 0) {
        throw ConfigurationError("fvt: D=" + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                                 " heads");
    }
}

template <typename T>
FvtModel<T>::FvtModel(std::uint64_t seed, const TokenizerConfig& tokenizer, const FVTConfig& config)
    : Classifier<T>(tokenizer), config_(config) {
    config_.validate(tokenizer.dim);
    Initializer init(seed);
    tokenizer_ = PatchTokenizer<T>(init, tokenizer);
    cls_ = init.normal<T>({1, tokenizer.dim});
    modality_ = init.normal<T>({2, tokenizer.dim});
    for (std::size_t l = 0; l < config_.layers; ++l)
        layers_.emplace_back(init, tokenizer.dim, config_.heads, config_.mlp_ratio);
    heads_ = ClassifierHeads<T>(init, tokenizer.dim);
    tokenizer_.collect(this->params_, "tokenizer");
    this->params_.add("fvt.cls", cls_, ParamGroup::heads);
    this->params_.add("fvt.modality", modality_, ParamGroup::heads);
    for (std::size_t l = 0; l < layers_.size(); ++l)
        layers_[l].collect(this->params_, "fvt.layer" + std::to_string(l), ParamGroup::heads);
    heads_.collect(this->params_, "heads");
}

template <typename T>
Tensor<T> FvtModel<T>::sequence(const Batch<T>& batch) const {
    const std::size_t sat_row[] = {0};
    const std::size_t street_row[] = {1};
    std::vector<Tensor<T>> parts;
    parts.push_back(expand(cls_, batch.size));
    const std::size_t d = this->tokenizer_config_.dim;
    parts.push_back(add(view_features(tokenizer_, batch, 0, 1),
                        reshape(gather_rows(modality_, std::span(sat_row)), Shape{d})));
    if (batch.street_views > 0) {
        parts.push_back(add(view_features(tokenizer_, batch, 1, batch.street_views),
                            reshape(gather_rows(modality_, std::span(street_row)), Shape{d})));
    }
    return concat_axis1(std::span<const Tensor<T>>(parts));
}

template <typename T>
Tensor<T> FvtModel<T>::encode(const Tensor<T>& sequence) const {
    Tensor<T> x = sequence;
    for (const auto& layer : layers_) x = layer.forward(x).x;
    return select_axis1(x, 0);
}

template <typename T>
HeadLogits<T> FvtModel<T>::forward(const Batch<T>& batch) const {
    return heads_(encode(sequence(batch)));
}

template <typename T>
std::vector<std::uint32_t> FvtModel<T>::config_fields() const {
    const auto& t = this->tokenizer_config_;
    return {static_cast<std::uint32_t>(t.image_size),   static_cast<std::uint32_t>(t.patch_size),
            static_cast<std::uint32_t>(t.channels),     static_cast<std::uint32_t>(t.dim),
            static_cast<std::uint32_t>(config_.layers), static_cast<std::uint32_t>(config_.heads),
            static_cast<std::uint32_t>(config_.mlp_ratio)};
}

#define LATENTFUSE_BASELINES(T)                                                                              \
    template Tensor<T> view_features<T>(const PatchTokenizer<T>&, const Batch<T>&, std::size_t, std::size_t); \
    template Tensor<T> pool_views<T>(const Tensor<T>&, PoolingMode, const Tensor<T>*);                       \
    template Tensor<T> pool_views<T>(std::span<const Tensor<T>>, PoolingMode, const Tensor<T>*);             \
    template class UnimodalModel<T>;                                                                         \
    template class ConcatModel<T>;                                                                           \
    template class FvtModel<T>;

LATENTFUSE_BASELINES(float)
LATENTFUSE_BASELINES(double)

} // namespace latentfuse
