#pragma once

// Gradient-check cases shared by the unit tests and the acceptance run:
// every differentiable op, and the full Perceiver, FVT and concatenation
// graphs at a toy configuration.

#include <functional>
#include <string>
#include <vector>

#include "latentfuse/baselines.hpp"
#include "latentfuse/perceiver.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

namespace lftest {

namespace lf = latentfuse;

struct GradCase {
    std::string name;
    std::function<GradcheckResult(std::uint64_t seed)> run;
};

// Scalar readout with a distinct, data-independent weight per element.
inline Tensor<double> readout(const Tensor<double>& out, SplitMix64& rng) {
    const std::size_t n = out.size();
    std::vector<double> t(n);
    for (auto& x : t) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return lf::bce_with_logits(lf::reshape(out, {n}), Tensor<double>({n}, std::move(t)));
}

inline GradcheckResult check_op(std::uint64_t seed, std::vector<Shape> shapes,
                                const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& op,
                                double lo = -1.0, double hi = 1.0) {
    SplitMix64 rng(seed);
    std::vector<Tensor<double>> inputs;
    std::vector<std::pair<std::string, Tensor<double>>> named;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        inputs.push_back(random_tensor<double>(rng, shapes[i], lo, hi, true));
        named.emplace_back("in" + std::to_string(i), inputs.back());
    }
    const std::uint64_t readout_seed = rng.next();
    return gradcheck(
        [&] {
            SplitMix64 r(readout_seed);
            return readout(op(inputs), r);
        },
        named);
}

inline std::vector<GradCase> op_cases() {
    using V = std::vector<Tensor<double>>;
    std::vector<GradCase> c;
    c.push_back({"matmul", [](std::uint64_t s) { return check_op(s, {{3, 4}, {4, 2}}, [](const V& x) { return lf::matmul(x[0], x[1]); }); }});
    c.push_back({"matmul_batched", [](std::uint64_t s) { return check_op(s, {{2, 3, 4}, {4, 5}}, [](const V& x) { return lf::matmul(x[0], x[1]); }); }});
    c.push_back({"add_broadcast", [](std::uint64_t s) { return check_op(s, {{2, 3, 4}, {3, 4}}, [](const V& x) { return lf::add(x[0], x[1]); }); }});
    c.push_back({"scale", [](std::uint64_t s) { return check_op(s, {{5}}, [](const V& x) { return lf::scale(x[0], -1.7); }); }});
    c.push_back({"gelu", [](std::uint64_t s) { return check_op(s, {{9}}, [](const V& x) { return lf::gelu(x[0]); }, -3.0, 3.0); }});
    c.push_back({"layer_norm", [](std::uint64_t s) {
                     return check_op(s, {{2, 8}, {8}, {8}}, [](const V& x) { return lf::layer_norm(x[0], x[1], x[2], 1e-5); });
                 }});
    c.push_back({"attention", [](std::uint64_t s) {
                     return check_op(s, {{2, 4}, {3, 4}, {3, 4}},
                                     [](const V& x) { return lf::scaled_dot_product_attention(x[0], x[1], x[2], 1).output; });
                 }});
    c.push_back({"attention_heads", [](std::uint64_t s) {
                     return check_op(s, {{3, 8}, {5, 8}, {5, 4}},
                                     [](const V& x) { return lf::scaled_dot_product_attention(x[0], x[1], x[2], 2).output; });
                 }});
    c.push_back({"attention_batched_shared_query", [](std::uint64_t s) {
                     return check_op(s, {{2, 4}, {2, 3, 4}, {2, 3, 4}},
                                     [](const V& x) { return lf::scaled_dot_product_attention(x[0], x[1], x[2], 2).output; });
                 }});
    c.push_back({"bce_with_logits", [](std::uint64_t s) {
                     SplitMix64 rng(s);
                     auto z = random_tensor<double>(rng, {7}, -3.0, 3.0, true);
                     std::vector<double> t(7);
                     for (auto& x : t) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
                     Tensor<double> targets({7}, t);
                     return gradcheck([&] { return lf::bce_with_logits(z, targets); }, {{"z", z}});
                 }});
    c.push_back({"sum", [](std::uint64_t s) {
                     return check_op(s, {{2, 3}}, [](const V& x) { return lf::reshape(lf::sum(x[0]), {1}); });
                 }});
    c.push_back({"mean", [](std::uint64_t s) {
                     return check_op(s, {{2, 3}}, [](const V& x) { return lf::reshape(lf::mean(x[0]), {1}); });
                 }});
    c.push_back({"reshape", [](std::uint64_t s) { return check_op(s, {{2, 6}}, [](const V& x) { return lf::reshape(x[0], {3, 4}); }); }});
    c.push_back({"expand", [](std::uint64_t s) { return check_op(s, {{2, 3}}, [](const V& x) { return lf::expand(x[0], 3); }); }});
    c.push_back({"mean_axis1", [](std::uint64_t s) { return check_op(s, {{2, 4, 3}}, [](const V& x) { return lf::mean_axis1(x[0]); }); }});
    c.push_back({"max_axis1", [](std::uint64_t s) { return check_op(s, {{2, 4, 3}}, [](const V& x) { return lf::max_axis1(x[0]); }); }});
    c.push_back({"concat_last", [](std::uint64_t s) {
                     return check_op(s, {{2, 3}, {2, 2}}, [](const V& x) { return lf::concat_last(x[0], x[1]); });
                 }});
    c.push_back({"concat_axis1", [](std::uint64_t s) {
                     return check_op(s, {{2, 1, 3}, {2, 2, 3}, {2, 3, 3}},
                                     [](const V& x) { return lf::concat_axis1<double>(std::span<const Tensor<double>>(x)); });
                 }});
    c.push_back({"select_axis1", [](std::uint64_t s) { return check_op(s, {{2, 3, 4}}, [](const V& x) { return lf::select_axis1(x[0], 1); }); }});
    c.push_back({"gather_rows", [](std::uint64_t s) {
                     const std::vector<std::size_t> rows = {2, 0, 2, 1, 2};
                     return check_op(s, {{3, 4}}, [rows](const V& x) {
                         return lf::gather_rows(x[0], std::span<const std::size_t>(rows));
                     });
                 }});
    return c;
}

// Perceiver toy: N_z=4, D_z=16, B=2, L=2, D=16, P=4 patches per view, N=2.
inline lf::TokenizerConfig toy_tokenizer() { return lf::TokenizerConfig{8, 4, 4, 16}; }

inline lf::PerceiverConfig toy_perceiver() {
    lf::PerceiverConfig c;
    c.num_latents = 4;
    c.latent_dim = 16;
    c.blocks = 2;
    c.layers = 2;
    c.input_dim = 16;
    c.heads_latent = 4;
    return c;
}

inline std::vector<lf::PreparedSample> toy_samples(std::uint64_t seed, std::size_t count, std::size_t street) {
    SplitMix64 rng(seed ^ 0x51ed);
    std::vector<lf::PreparedSample> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(random_sample(rng, street, 4, 8));
    return out;
}

inline GradcheckResult check_model(lf::Classifier<double>& model, std::uint64_t seed, std::size_t street,
                                   Probe probe) {
    const auto samples = toy_samples(seed, 2, street);
    const auto batch = batch_of<double>(samples, model.tokenizer_config());
    return gradcheck([&] { return bce_joint(model.forward(batch), batch); }, model.parameters(), probe);
}

inline std::vector<GradCase> model_cases(Probe probe) {
    std::vector<GradCase> c;
    c.push_back({"perceiver", [probe](std::uint64_t s) {
                     lf::PerceiverClassifier<double> m(s, toy_tokenizer(), toy_perceiver());
                     return check_model(m, s, 2, Probe{probe.per_tensor, s});
                 }});
    c.push_back({"fvt", [probe](std::uint64_t s) {
                     lf::FvtModel<double> m(s, toy_tokenizer(), lf::FVTConfig{2, 8, 4});
                     return check_model(m, s, 2, Probe{probe.per_tensor, s});
                 }});
    c.push_back({"concat", [probe](std::uint64_t s) {
                     lf::ConcatModel<double> m(s, toy_tokenizer(), lf::PoolingMode::max);
                     return check_model(m, s, 2, Probe{probe.per_tensor, s});
                 }});
    c.push_back({"concat_attention_pool", [probe](std::uint64_t s) {
                     lf::ConcatModel<double> m(s, toy_tokenizer(), lf::PoolingMode::attention);
                     return check_model(m, s, 3, Probe{probe.per_tensor, s});
                 }});
    return c;
}

} // namespace lftest
