#pragma once

// Masked model inputs and the on-disk dataset layout:
//
//   manifest.json   sample records (id, label bits, file names, cameras)
//   <name>.lft      "LFT0", u32 channels, height, width (LE), f32 CHW pixels
//   <name>.lfm      "LFM0", u32 height, width (LE), u8 mask values

#include <filesystem>
#include <span>
#include <vector>

#include "latentfuse/masking.hpp"
#include "latentfuse/model.hpp"
#include "latentfuse/synthetic.hpp"

namespace latentfuse {

PreparedSample prepare_sample(const BuildingSample& sample, MaskingStrategy satellite, MaskingStrategy street);
std::vector<PreparedSample> prepare_samples(std::span<const BuildingSample> samples, MaskingStrategy satellite,
                                            MaskingStrategy street);

void write_image(const std::filesystem::path& path, const Image& img);
Image read_image(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& path);

// Writes into an existing or new directory; files are overwritten.
void write_dataset(const std::filesystem::path& dir, std::span<const BuildingSample> samples);
// Throws ValidationError for a missing or malformed manifest or file.
std::vector<BuildingSample> read_dataset(const std::filesystem::path& dir);

} // namespace latentfuse
