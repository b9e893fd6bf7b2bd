#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "latentfuse/checkpoint.hpp"
#include "latentfuse/errors.hpp"
#include "support/fixtures.hpp"

using namespace latentfuse;

namespace {

const TokenizerConfig kTok{8, 4, 4, 16};

std::vector<ModelSpec> every_kind() {
    return {
        ModelSpec{ModelKind::perceiver, kTok, PerceiverConfig{4, 8, 2, 1, 16, 12, 2, 2}},
        ModelSpec{ModelKind::fvt, kTok, {}, FVTConfig{2, 4, 2}},
        ModelSpec{ModelKind::concat, kTok, {}, {}, PoolingMode::attention},
        ModelSpec{ModelKind::satellite, kTok},
        ModelSpec{ModelKind::street, kTok, {}, {}, PoolingMode::mean},
    };
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST(Checkpoint, RoundTripIsBitExactForEveryKind) {
    SplitMix64 rng(1);
    std::vector<PreparedSample> probe;
    for (int i = 0; i < 3; ++i) probe.push_back(lftest::random_sample(rng, 2, 4, 8));
    for (const auto& spec : every_kind()) {
        const auto model = make_classifier<float>(spec, 7);
        const auto path = temp_file("latentfuse_" + to_string(spec.kind) + ".ckpt");
        save_checkpoint(path, *model);
        const auto back = load_checkpoint(path);
        EXPECT_EQ(back->kind(), spec.kind);
        EXPECT_EQ(back->magic(), model->magic());
        EXPECT_EQ(back->config_fields(), model->config_fields());
        EXPECT_EQ(back->parameters().flatten(), model->parameters().flatten());
        const auto batch = lftest::batch_of<float>(probe, kTok);
        const auto a = model->forward(batch), b = back->forward(batch);
        EXPECT_TRUE(std::equal(a.elements.data().begin(), a.elements.data().end(), b.elements.data().begin()));
        EXPECT_TRUE(std::equal(a.materials.data().begin(), a.materials.data().end(), b.materials.data().begin()));
        EXPECT_EQ(encode_checkpoint(*back), slurp(path));
        std::filesystem::remove(path);
    }
}

TEST(Checkpoint, MagicsPerKind) {
    const std::vector<std::string> want = {"LFZ1", "LFT1", "LFC1", "LFU1", "LFU1"};
    const auto specs = every_kind();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto m = make_classifier<float>(specs[i], 1)->magic();
        EXPECT_EQ(std::string(m.begin(), m.end()), want[i]);
    }
}

TEST(Checkpoint, HeaderLayout) {
    const auto model = make_classifier<float>(every_kind()[0], 2);
    const auto path = temp_file("latentfuse_header.ckpt");
    save_checkpoint(path, *model);
    const auto h = read_checkpoint_header(path);
    EXPECT_EQ(std::string(h.magic.begin(), h.magic.end()), "LFZ1");
    EXPECT_EQ(h.fields, (std::vector<std::uint32_t>{8, 4, 4, 16, 4, 8, 2, 1, 12, 2, 2}));
    EXPECT_EQ(h.parameter_count, model->parameters().scalar_count());
    const auto bytes = slurp(path);
    EXPECT_EQ(bytes.size(), 4 + 4 + 4 * 11 + 8 + 4 * h.parameter_count);
    EXPECT_EQ(std::uint8_t(bytes[4]), 11);
    std::filesystem::remove(path);
}

TEST(Checkpoint, SpecRoundTrip) {
    for (const auto& spec : every_kind()) {
        const auto model = make_classifier<float>(spec, 3);
        const auto back = spec_from_checkpoint(model->magic(), model->config_fields());
        EXPECT_EQ(back.kind, spec.kind);
        EXPECT_EQ(make_classifier<float>(back, 3)->parameters().flatten(), model->parameters().flatten());
    }
}

TEST(Checkpoint, BadMagicIsValidationError) {
    EXPECT_THROW(spec_from_checkpoint({'N', 'O', 'P', 'E'}, {}), ValidationError);
    EXPECT_THROW(spec_from_checkpoint({'L', 'F', 'Z', '1'}, {1, 2, 3}), ValidationError);
    const auto path = temp_file("latentfuse_bad.ckpt");
    {
        std::ofstream out(path, std::ios::binary);
        out << "JUNKJUNKJUNK";
    }
    EXPECT_THROW(load_checkpoint(path), ValidationError);
    std::filesystem::remove(path);
}

TEST(Checkpoint, TruncatedFileIsValidationError) {
    const auto model = make_classifier<float>(every_kind()[3], 4);
    const auto path = temp_file("latentfuse_trunc.ckpt");
    auto bytes = encode_checkpoint(*model);
    bytes.resize(bytes.size() - 5);
    {
        std::ofstream out(path, std::ios::binary);
        out << bytes;
    }
    EXPECT_THROW(load_checkpoint(path), ValidationError);
    std::filesystem::remove(path);
}

TEST(Checkpoint, ParameterCountMismatchIsValidationError) {
    const auto model = make_classifier<float>(every_kind()[3], 5);
    auto bytes = encode_checkpoint(*model);
    // Bump the stored parameter count (u64 after magic, count and six fields).
    bytes[4 + 4 + 4 * 6] += 1;
    const auto path = temp_file("latentfuse_count.ckpt");
    {
        std::ofstream out(path, std::ios::binary);
        out << bytes;
    }
    EXPECT_THROW(load_checkpoint(path), ValidationError);
    std::filesystem::remove(path);
}

TEST(Checkpoint, MissingFileIsValidationError) {
    EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), ValidationError);
}
