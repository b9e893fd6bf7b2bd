#pragma once

// Patch tokenization and the additive token embeddings.
//
// The tokenizer is a single trainable linear projection of flattened
// (channel, row, column) patches: a one-layer ViT stem standing in for a
// pretrained backbone. Each token is then augmented with a factorized 2D
// positional embedding (row table + column table), a modality embedding and
// a view-slot embedding. The satellite image occupies view slot 0, street
// views occupy slots 1..8 in dataset order.

#include <cstddef>
#include <span>
#include <vector>

#include "latentfuse/image.hpp"
#include "latentfuse/layers.hpp"

namespace latentfuse {

inline constexpr std::size_t kMaxStreetViews = 8;

struct TokenizerConfig {
    std::size_t image_size = 32;
    std::size_t patch_size = 8;
    std::size_t channels = 4;
    std::size_t dim = 64;

    std::size_t grid_side() const { return image_size / patch_size; }
    std::size_t patches_per_view() const { return grid_side() * grid_side(); }
    std::size_t patch_dim() const { return channels * patch_size * patch_size; }

    // Throws ConfigurationError for non-divisible sizes or channel counts
    // other than 3 and 4.
    void validate() const;
};

// Flattened patches in row-major grid order, each laid out as
// (channel, row-in-patch, column-in-patch). Returns P * C * ps * ps values.
std::vector<float> patchify(const Image& img, std::size_t patch_size);

// Writes patchify(img) into out (which must have the right length),
// optionally mirrored left-right and scaled by gain.
void patchify_into(const Image& img, std::size_t patch_size, std::span<float> out, bool flip = false,
                   float gain = 1.0f);

template <typename T>
class PatchTokenizer {
public:
    PatchTokenizer() = default;
    PatchTokenizer(Initializer& init, const TokenizerConfig& config)
        : config_(config), projection_(init, config.patch_dim(), config.dim) {
        config_.validate();
    }

    const TokenizerConfig& config() const { return config_; }

    // patches: [..., patch_dim] -> [..., dim]
    Tensor<T> project(const Tensor<T>& patches) const {
        if (patches.shape().back() != projection_.in_features()) {
            throw ConfigurationError("patch width " + std::to_string(patches.shape().back()) +
                                     " does not match projection input " +
                                     std::to_string(projection_.in_features()));
        }
        return projection_(patches);
    }

    // One image -> [P, dim]. The projection is sized for a fixed channel
    // count; a 4-channel RGB-M image needs a 4-channel projection.
    Tensor<T> tokenize(const Image& img) const {
        if (img.channels != config_.channels) {
            throw ConfigurationError("image has " + std::to_string(img.channels) + " channels, tokenizer expects " +
                                     std::to_string(config_.channels));
        }
        if (img.height != config_.image_size || img.width != config_.image_size) {
            throw ConfigurationError("image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                     ", tokenizer expects " + std::to_string(config_.image_size));
        }
        const auto flat = patchify(img, config_.patch_size);
        std::vector<T> data(flat.begin(), flat.end());
        return project(Tensor<T>({config_.patches_per_view(), config_.patch_dim()}, std::move(data)));
    }

    const Linear<T>& projection() const { return projection_; }

    void collect(ParameterList<T>& list, const std::string& prefix) const {
        projection_.collect(list, prefix + ".projection", ParamGroup::backbone);
    }

private:
    TokenizerConfig config_;
    Linear<T> projection_;
};

enum class Modality : std::size_t { satellite = 0, street = 1 };

struct TokenMeta {
    std::size_t view_index = 0;
    Modality modality = Modality::satellite;
    std::size_t row = 0;
    std::size_t col = 0;

    bool operator==(const TokenMeta&) const = default;
};

// Token metadata for one satellite view followed by street_views street
// views, grid_side * grid_side tokens each.
std::vector<TokenMeta> token_layout(std::size_t street_views, std::size_t grid_side);

template <typename T>
struct TokenSequence {
    Tensor<T> tokens;  // [T, D] or [B, T, D]
    std::vector<TokenMeta> meta;

    std::size_t length() const { return meta.size(); }
};

template <typename T>
struct EmbeddingTables {
    Tensor<T> rows;      // [grid_side, D]
    Tensor<T> cols;      // [grid_side, D]
    Tensor<T> modality;  // [2, D]
    Tensor<T> view;      // [kMaxStreetViews + 1, D]

    EmbeddingTables() = default;
    EmbeddingTables(Initializer& init, std::size_t grid_side, std::size_t dim)
        : rows(init.normal<T>({grid_side, dim})),
          cols(init.normal<T>({grid_side, dim})),
          modality(init.normal<T>({2, dim})),
          view(init.normal<T>({kMaxStreetViews + 1, dim})) {}

    void collect(ParameterList<T>& list, const std::string& prefix) const {
        list.add(prefix + ".pos_rows", rows, ParamGroup::heads);
        list.add(prefix + ".pos_cols", cols, ParamGroup::heads);
        list.add(prefix + ".modality", modality, ParamGroup::heads);
        list.add(prefix + ".view", view, ParamGroup::heads);
    }
};

// token' = token + rows[r] + cols[c] + modality[m] + view[v]; meta unchanged.
// Throws ConfigurationError when a view index or grid position falls outside
// its table.
template <typename T>
TokenSequence<T> augment_tokens(const TokenSequence<T>& seq, const EmbeddingTables<T>& tables) {
    const std::size_t n = seq.meta.size();
    const std::size_t len_axis = seq.tokens.rank() - 2;
    if (seq.tokens.rank() < 2 || seq.tokens.dim(len_axis) != n) {
        throw DimensionError("augment_tokens: token tensor " + shape_string(seq.tokens.shape()) + " vs " +
                             std::to_string(n) + " metadata entries");
    }
    std::vector<std::size_t> r(n), c(n), m(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& meta = seq.meta[i];
        if (meta.view_index >= tables.view.dim(0)) {
            throw ConfigurationError("augment_tokens: view index " + std::to_string(meta.view_index) +
                                     " outside view table of " + std::to_string(tables.view.dim(0)));
        }
        if (meta.row >= tables.rows.dim(0) || meta.col >= tables.cols.dim(0)) {
            throw ConfigurationError("augment_tokens: grid position outside positional table");
        }
        r[i] = meta.row;
        c[i] = meta.col;
        m[i] = static_cast<std::size_t>(meta.modality);
        v[i] = meta.view_index;
    }
    Tensor<T> embedding = add(add(gather_rows(tables.rows, std::span<const std::size_t>(r)),
                                  gather_rows(tables.cols, std::span<const std::size_t>(c))),
                              add(gather_rows(tables.modality, std::span<const std::size_t>(m)),
                                  gather_rows(tables.view, std::span<const std::size_t>(v))));
    return TokenSequence<T>{add(seq.tokens, embedding), seq.meta};
}

} // namespace latentfuse
