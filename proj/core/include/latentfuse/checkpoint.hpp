#pragma once

// Model construction from a description, and the checkpoint container:
//
//   magic (4 bytes) | u32 field count | u32 fields... | u64 parameter count
//   | f32 parameters in declaration order
//
// All integers and floats little-endian. Magics: LFZ1 Perceiver, LFC1
// concatenation, LFT1 feature-vector transformer, LFU1 uni-modal.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "latentfuse/baselines.hpp"
#include "latentfuse/perceiver.hpp"

namespace latentfuse {

struct ModelSpec {
    ModelKind kind = ModelKind::perceiver;
    TokenizerConfig tokenizer;
    PerceiverConfig perceiver;
    FVTConfig fvt;
    PoolingMode pooling = PoolingMode::max;
};

template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelSpec& spec, std::uint64_t seed);

// Inverse of Classifier::magic/config_fields. ValidationError for an unknown
// magic or a field list of the wrong length.
ModelSpec spec_from_checkpoint(const std::array<char, 4>& magic, const std::vector<std::uint32_t>& fields);

struct CheckpointHeader {
    std::array<char, 4> magic{};
    std::vector<std::uint32_t> fields;
    std::uint64_t parameter_count = 0;
};

std::string encode_checkpoint(const Classifier<float>& model);
void save_checkpoint(const std::filesystem::path& path, const Classifier<float>& model);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);
// Rebuilds the architecture and loads the parameters bit-exactly.
std::unique_ptr<Classifier<float>> load_checkpoint(const std::filesystem::path& path);

} // namespace latentfuse
