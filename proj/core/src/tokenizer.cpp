#include "latentfuse/tokenizer.hpp"

#include <algorithm>

namespace latentfuse {

void TokenizerConfig::validate() const {
    if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
        throw ConfigurationError("image size " + std::to_string(image_size) + " is not divisible by patch size " +
                                 std::to_string(patch_size));
    }
    if (channels != 3 && channels != 4) {
        throw ConfigurationError("tokenizer channels must be 3 or 4, got " + std::to_string(channels));
    }
    if (dim == 0) throw ConfigurationError("token dimension must be positive");
}

std::vector<float> patchify(const Image& img, std::size_t patch_size) {
    if (img.height != img.width) throw ConfigurationError("patchify: image must be square");
    if (patch_size == 0 || img.height % patch_size != 0) {
        throw ConfigurationError("patchify: side " + std::to_string(img.height) + " not divisible by patch " +
                                 std::to_string(patch_size));
    }
    const std::size_t side = img.height / patch_size;
    std::vector<float> out(side * side * img.channels * patch_size * patch_size);
    patchify_into(img, patch_size, out);
    return out;
}

void patchify_into(const Image& img, std::size_t patch_size, std::span<float> out, bool flip, float gain) {
    const std::size_t side = img.height / patch_size;
    const std::size_t pd = img.channels * patch_size * patch_size;
    if (out.size() != side * side * pd) throw DimensionError("patchify_into: output length mismatch");
    const std::size_t w = img.width;
    std::size_t o = 0;
    for (std::size_t gy = 0; gy < side; ++gy) {
        for (std::size_t gx = 0; gx < side; ++gx) {
            for (std::size_t c = 0; c < img.channels; ++c) {
                // Gain only touches colour channels; the mask channel stays binary.
                const float g = c < 3 ? gain : 1.0f;
                for (std::size_t py = 0; py < patch_size; ++py) {
                    const std::size_t y = gy * patch_size + py;
                    for (std::size_t px = 0; px < patch_size; ++px) {
                        std::size_t x = gx * patch_size + px;
                        if (flip) x = w - 1 - x;
                        float v = img.at(c, y, x) * g;
                        if (c < 3) v = std::min(1.0f, std::max(0.0f, v));
                        out[o++] = v;
                    }
                }
            }
        }
    }
}

std::vector<TokenMeta> token_layout(std::size_t street_views, std::size_t grid_side) {
    std::vector<TokenMeta> meta;
    meta.reserve((street_views + 1) * grid_side * grid_side);
    for (std::size_t v = 0; v <= street_views; ++v) {
        const Modality m = v == 0 ? Modality::satellite : Modality::street;
        for (std::size_t r = 0; r < grid_side; ++r)
            for (std::size_t c = 0; c < grid_side; ++c) meta.push_back(TokenMeta{v, m, r, c});
    }
    return meta;
}

} // namespace latentfuse
