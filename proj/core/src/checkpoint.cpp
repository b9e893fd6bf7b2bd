#include "latentfuse/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace latentfuse {

template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case ModelKind::satellite:
        case ModelKind::street:
            return std::make_unique<UnimodalModel<T>>(seed, spec.tokenizer, spec.kind, spec.pooling);
        case ModelKind::concat: return std::make_unique<ConcatModel<T>>(seed, spec.tokenizer, spec.pooling);
        case ModelKind::fvt: return std::make_unique<FvtModel<T>>(seed, spec.tokenizer, spec.fvt);
        case ModelKind::perceiver: {
            PerceiverConfig p = spec.perceiver;
            p.input_dim = spec.tokenizer.dim;
            return std::make_unique<PerceiverClassifier<T>>(seed, spec.tokenizer, p);
        }
    }
    throw ConfigurationError("make_classifier: unknown model kind");
}

template std::unique_ptr<Classifier<float>> make_classifier<float>(const ModelSpec&, std::uint64_t);
template std::unique_ptr<Classifier<double>> make_classifier<double>(const ModelSpec&, std::uint64_t);

namespace {

PoolingMode pooling_field(std::uint32_t v) {
    if (v > 2) throw ValidationError("checkpoint: bad pooling mode " + std::to_string(v));
    return static_cast<PoolingMode>(v);
}

void expect_fields(const std::vector<std::uint32_t>& f, std::size_t n, const std::string& magic) {
    if (f.size() != n) {
        throw ValidationError("checkpoint: " + magic + " carries " + std::to_string(f.size()) + " config fields, expected " +
                              std::to_string(n));
    }
}

} // namespace

ModelSpec spec_from_checkpoint(const std::array<char, 4>& magic, const std::vector<std::uint32_t>& f) {
    const std::string m = binary::magic_string(magic);
    ModelSpec spec;
    auto tokenizer = [&] {
        spec.tokenizer.image_size = f[0];
        spec.tokenizer.patch_size = f[1];
        spec.tokenizer.channels = f[2];
        spec.tokenizer.dim = f[3];
    };
    if (m == "LFZ1") {
        expect_fields(f, 11, m);
        tokenizer();
        spec.kind = ModelKind::perceiver;
        spec.perceiver.input_dim = f[3];
        spec.perceiver.num_latents = f[4];
        spec.perceiver.latent_dim = f[5];
        spec.perceiver.blocks = f[6];
        spec.perceiver.layers = f[7];
        spec.perceiver.out_dim = f[8];
        spec.perceiver.mlp_ratio = f[9];
        spec.perceiver.heads_latent = f[10];
    } else if (m == "LFC1") {
        expect_fields(f, 5, m);
        tokenizer();
        spec.kind = ModelKind::concat;
        spec.pooling = pooling_field(f[4]);
    } else if (m == "LFT1") {
        expect_fields(f, 7, m);
        tokenizer();
        spec.kind = ModelKind::fvt;
        spec.fvt.layers = f[4];
        spec.fvt.heads = f[5];
        spec.fvt.mlp_ratio = f[6];
    } else if (m == "LFU1") {
        expect_fields(f, 6, m);
        tokenizer();
        if (f[4] > 1) throw ValidationError("checkpoint: bad uni-modal branch " + std::to_string(f[4]));
        spec.kind = f[4] == 1 ? ModelKind::street : ModelKind::satellite;
        spec.pooling = pooling_field(f[5]);
    } else {
        throw ValidationError("checkpoint: unknown magic '" + m + "'");
    }
    return spec;
}

std::string encode_checkpoint(const Classifier<float>& model) {
    std::ostringstream os(std::ios::binary);
    binary::put_magic(os, model.magic());
    const auto fields = model.config_fields();
    binary::put_u32(os, std::uint32_t(fields.size()));
    for (auto f : fields) binary::put_u32(os, f);
    const auto values = model.parameters().flatten();
    binary::put_u64(os, values.size());
    for (float v : values) binary::put_f32(os, v);
    return os.str();
}

void save_checkpoint(const std::filesystem::path& path, const Classifier<float>& model) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot write checkpoint '" + path.string() + "'");
    const std::string bytes = encode_checkpoint(model);
    os.write(bytes.data(), std::streamsize(bytes.size()));
}

namespace {

CheckpointHeader read_header(std::istream& is, const std::string& what) {
    CheckpointHeader h;
    h.magic = binary::get_magic(is, what);
    const std::uint32_t n = binary::get_u32(is, what);
    if (n > 64) throw ValidationError(what + ": implausible config field count");
    for (std::uint32_t i = 0; i < n; ++i) h.fields.push_back(binary::get_u32(is, what));
    h.parameter_count = binary::get_u64(is, what);
    return h;
}

} // namespace

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot read checkpoint '" + path.string() + "'");
    return read_header(is, path.string());
}

std::unique_ptr<Classifier<float>> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot read checkpoint '" + path.string() + "'");
    const std::string what = path.string();
    const CheckpointHeader h = read_header(is, what);
    auto model = make_classifier<float>(spec_from_checkpoint(h.magic, h.fields), 0);
    if (model->parameters().scalar_count() != h.parameter_count) {
        throw ValidationError(what + ": parameter count " + std::to_string(h.parameter_count) +
                              " does not match the architecture (" +
                              std::to_string(model->parameters().scalar_count()) + ")");
    }
    std::vector<float> values(h.parameter_count);
    for (auto& v : values) v = binary::get_f32(is, what);
    model->parameters().assign(values);
    return model;
}

} // namespace latentfuse
