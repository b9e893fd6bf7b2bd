#pragma once

#include <string>
#include <string_view>

#include "latentfuse/image.hpp"

namespace latentfuse {

enum class MaskingStrategy {
    full,      // unmodified RGB
    crop,      // I * M
    inv_crop,  // I * (1 - M)
    rgbm,      // [I; M], four channels
};

MaskingStrategy parse_masking(std::string_view name);
std::string to_string(MaskingStrategy strategy);

// Channel count a strategy produces from an RGB input.
std::size_t masked_channels(MaskingStrategy strategy);

// img must be 3-channel and match mask's size; mask must be strictly binary.
// Throws ValidationError otherwise.
Image apply_masking(const Image& img, const BinaryMask& mask, MaskingStrategy strategy);

// Mask-free variant; only valid for MaskingStrategy::full (ContractError otherwise).
Image apply_masking(const Image& img, MaskingStrategy strategy);

} // namespace latentfuse
