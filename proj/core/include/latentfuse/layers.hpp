#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latentfuse/rng.hpp"
#include "latentfuse/tensor.hpp"

namespace latentfuse {

// Learning-rate group of a parameter.
enum class ParamGroup { backbone, heads };

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> tensor;
    ParamGroup group;
};

// Trainable tensors of a model in declaration order. The order defines the
// checkpoint blob layout.
template <typename T>
class ParameterList {
public:
    void add(std::string name, Tensor<T> tensor, ParamGroup group) {
        items_.push_back(Parameter<T>{std::move(name), std::move(tensor), group});
    }

    std::span<Parameter<T>> items() { return items_; }
    std::span<const Parameter<T>> items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p.tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& p : items_) p.tensor.zero_grad();
    }

    std::vector<T> flatten() const {
        std::vector<T> out;
        out.reserve(scalar_count());
        for (const auto& p : items_) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
        return out;
    }

    void assign(std::span<const T> values) {
        if (values.size() != scalar_count()) {
            throw DimensionError("parameter blob has " + std::to_string(values.size()) + " values, model needs " +
                                 std::to_string(scalar_count()));
        }
        std::size_t offset = 0;
        for (auto& p : items_) {
            auto dst = p.tensor.mutable_data();
            std::copy_n(values.begin() + offset, dst.size(), dst.begin());
            offset += dst.size();
        }
    }

private:
    std::vector<Parameter<T>> items_;
};

// Truncated-normal weights: std 0.02 for embedding tables and learned
// queries, 1/sqrt(fan_in) for projection matrices. Zero biases, unit/zero
// norm affine.
class Initializer {
public:
    explicit Initializer(std::uint64_t seed, double stddev = 0.02) : rng_(seed), stddev_(stddev) {}

    template <typename T>
    Tensor<T> normal(Shape shape) {
        std::vector<T> data(shape_size(shape));
        for (auto& x : data) x = static_cast<T>(rng_.truncated_normal(stddev_));
        return Tensor<T>(std::move(shape), std::move(data), true);
    }

    // [fan_in, fan_out] projection.
    template <typename T>
    Tensor<T> fan_in(Shape shape) {
        const double stddev = 1.0 / std::sqrt(static_cast<double>(shape.at(0)));
        std::vector<T> data(shape_size(shape));
        for (auto& x : data) x = static_cast<T>(rng_.truncated_normal(stddev));
        return Tensor<T>(std::move(shape), std::move(data), true);
    }

    template <typename T>
    Tensor<T> zeros(Shape shape) {
        return Tensor<T>::zeros(std::move(shape), true);
    }

    template <typename T>
    Tensor<T> ones(Shape shape) {
        return Tensor<T>::full(std::move(shape), T(1), true);
    }

private:
    SplitMix64 rng_;
    double stddev_;
};

template <typename T>
struct Linear {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [out]

    Linear() = default;
    Linear(Initializer& init, std::size_t in, std::size_t out)
        : weight(init.fan_in<T>({in, out})), bias(init.zeros<T>({out})) {}

    Tensor<T> operator()(const Tensor<T>& x) const { return add(matmul(x, weight), bias); }

    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }

    void collect(ParameterList<T>& list, const std::string& prefix, ParamGroup group) const {
        list.add(prefix + ".weight", weight, group);
        list.add(prefix + ".bias", bias, group);
    }
};

template <typename T>
struct LayerNorm {
    Tensor<T> gamma;
    Tensor<T> beta;
    T eps = T(1e-5);

    LayerNorm() = default;
    LayerNorm(Initializer& init, std::size_t dim) : gamma(init.ones<T>({dim})), beta(init.zeros<T>({dim})) {}

    Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, eps); }

    void collect(ParameterList<T>& list, const std::string& prefix, ParamGroup group) const {
        list.add(prefix + ".gamma", gamma, group);
        list.add(prefix + ".beta", beta, group);
    }
};

// Pre-norm transformer sub-layer: x + Attn(LN(x)), then x + MLP(LN(x)).
template <typename T>
struct TransformerLayer {
    LayerNorm<T> attn_norm;
    Linear<T> query, key, value, out;
    LayerNorm<T> mlp_norm;
    Linear<T> fc1, fc2;
    std::size_t heads = 1;

    struct Output {
        Tensor<T> x;
        Tensor<T> attention;  // [B?, heads, n, n]
    };

    TransformerLayer() = default;
    TransformerLayer(Initializer& init, std::size_t dim, std::size_t heads_, std::size_t mlp_ratio)
        : attn_norm(init, dim),
          query(init, dim, dim),
          key(init, dim, dim),
          value(init, dim, dim),
          out(init, dim, dim),
          mlp_norm(init, dim),
          fc1(init, dim, dim * mlp_ratio),
          fc2(init, dim * mlp_ratio, dim),
          heads(heads_) {}

    Output forward(const Tensor<T>& x) const {
        const Tensor<T> h = attn_norm(x);
        auto att = scaled_dot_product_attention(query(h), key(h), value(h), heads);
        const Tensor<T> x1 = add(x, out(att.output));
        const Tensor<T> x2 = add(x1, fc2(gelu(fc1(mlp_norm(x1)))));
        return Output{x2, att.weights};
    }

    void collect(ParameterList<T>& list, const std::string& prefix, ParamGroup group) const {
        attn_norm.collect(list, prefix + ".attn_norm", group);
        query.collect(list, prefix + ".query", group);
        key.collect(list, prefix + ".key", group);
        value.collect(list, prefix + ".value", group);
        out.collect(list, prefix + ".out", group);
        mlp_norm.collect(list, prefix + ".mlp_norm", group);
        fc1.collect(list, prefix + ".fc1", group);
        fc2.collect(list, prefix + ".fc2", group);
    }
};

// Single-head pre-norm cross-attention without a query residual:
// out = W_o * Attn(LN(query) W_q, LN(inputs) W_k, LN(inputs) W_v).
template <typename T>
struct CrossAttention {
    LayerNorm<T> query_norm;
    LayerNorm<T> input_norm;
    Linear<T> query, key, value, out;

    CrossAttention() = default;
    CrossAttention(Initializer& init, std::size_t query_dim, std::size_t input_dim, std::size_t attn_dim,
                   std::size_t out_dim)
        : query_norm(init, query_dim),
          input_norm(init, input_dim),
          query(init, query_dim, attn_dim),
          key(init, input_dim, attn_dim),
          value(init, input_dim, attn_dim),
          out(init, attn_dim, out_dim) {}

    AttentionOutput<T> forward(const Tensor<T>& queries, const Tensor<T>& inputs) const {
        const Tensor<T> kv = input_norm(inputs);
        auto att = scaled_dot_product_attention(query(query_norm(queries)), key(kv), value(kv), 1);
        return AttentionOutput<T>{out(att.output), att.weights};
    }

    void collect(ParameterList<T>& list, const std::string& prefix, ParamGroup group) const {
        query_norm.collect(list, prefix + ".query_norm", group);
        input_norm.collect(list, prefix + ".input_norm", group);
        query.collect(list, prefix + ".query", group);
        key.collect(list, prefix + ".key", group);
        value.collect(list, prefix + ".value", group);
        out.collect(list, prefix + ".out", group);
    }
};

} // namespace latentfuse
