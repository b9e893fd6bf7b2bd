#include "latentfuse/masking.hpp"

#include <algorithm>

#include "latentfuse/errors.hpp"

namespace latentfuse {

MaskingStrategy parse_masking(std::string_view name) {
    if (name == "full") return MaskingStrategy::full;
    if (name == "crop") return MaskingStrategy::crop;
    if (name == "inv_crop" || name == "inv-crop") return MaskingStrategy::inv_crop;
    if (name == "rgbm") return MaskingStrategy::rgbm;
    throw ConfigurationError("unknown masking strategy '" + std::string(name) + "'");
}

std::string to_string(MaskingStrategy strategy) {
    switch (strategy) {
        case MaskingStrategy::full: return "full";
        case MaskingStrategy::crop: return "crop";
        case MaskingStrategy::inv_crop: return "inv_crop";
        case MaskingStrategy::rgbm: return "rgbm";
    }
    return "?";
}

std::size_t masked_channels(MaskingStrategy strategy) {
    return strategy == MaskingStrategy::rgbm ? 4 : 3;
}

Image apply_masking(const Image& img, const BinaryMask& mask, MaskingStrategy strategy) {
    if (img.channels != 3) {
        throw ValidationError("apply_masking: expected a 3-channel image, got " + std::to_string(img.channels));
    }
    if (img.height != mask.height || img.width != mask.width) {
        throw ValidationError("apply_masking: mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                              " does not match image " + std::to_string(img.height) + "x" +
                              std::to_string(img.width));
    }
    if (std::any_of(mask.values.begin(), mask.values.end(), [](auto v) { return v > 1; })) {
        throw ValidationError("apply_masking: mask is not binary");
    }

    const std::size_t plane = img.height * img.width;
    switch (strategy) {
        case MaskingStrategy::full: return img;
        case MaskingStrategy::crop:
        case MaskingStrategy::inv_crop: {
            const std::uint8_t keep = strategy == MaskingStrategy::crop ? 1 : 0;
            Image out = img;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t i = 0; i < plane; ++i)
                    if (mask.values[i] != keep) out.pixels[c * plane + i] = 0.0f;
            return out;
        }
        case MaskingStrategy::rgbm: {
            Image out(4, img.height, img.width);
            std::copy(img.pixels.begin(), img.pixels.end(), out.pixels.begin());
            for (std::size_t i = 0; i < plane; ++i) out.pixels[3 * plane + i] = static_cast<float>(mask.values[i]);
            return out;
        }
    }
    return img;
}

Image apply_masking(const Image& img, MaskingStrategy strategy) {
    if (strategy != MaskingStrategy::full) {
        throw ContractError("apply_masking: strategy '" + to_string(strategy) + "' requires a mask");
    }
    if (img.channels != 3) {
        throw ValidationError("apply_masking: expected a 3-channel image, got " + std::to_string(img.channels));
    }
    return img;
}

} // namespace latentfuse
