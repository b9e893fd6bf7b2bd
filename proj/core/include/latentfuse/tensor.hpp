#pragma once

// Minimal reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a dense row-major array with an optional
// gradient slot. Operations executed while a Tape is active on the calling
// thread, and that touch at least one tensor with requires_grad set, are
// recorded on that tape together with their backward closure. Tape::backward
// replays the records in reverse creation order, which is always a valid
// topological order of the graph.
//
// Every op checks its output for NaN/Inf and throws NonFiniteError.
//
// Instantiated for float (training) and double (gradient checking).

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "latentfuse/errors.hpp"

namespace latentfuse {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class Tape;

namespace detail {

// Every buffer starts on a 64-byte boundary, so vectorized reductions split
// their work identically whichever thread or arena allocated the tensor.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct TensorImpl {
    Shape shape;
    AlignedVector<T> data;
    AlignedVector<T> grad;  // empty until the first accumulation
    bool requires_grad = false;
    const void* tape = nullptr;  // recording tape, when this is an op output
    std::size_t tape_index = 0;
};

} // namespace detail

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t size() const { return impl_->data.size(); }

    std::span<const T> data() const { return impl_->data; }
    // In-place access for initialization, optimizer updates and checkpoint
    // loading. Never call while a tape holds closures over this tensor.
    std::span<T> mutable_data() { return impl_->data; }
    T item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool value) { impl_->requires_grad = value; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const T> grad() const { return impl_->grad; }
    // Gradient slot, zero-filled on first access. Handles share storage, so
    // this is callable through const handles held by backward closures.
    std::span<T> grad_buffer() const;
    void zero_grad() { impl_->grad.clear(); }

    // Value copy with no gradient history.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    std::shared_ptr<detail::TensorImpl<T>> impl_;
    friend class Tape<T>;
};

// Records operations for reverse-mode differentiation. Constructing a Tape
// makes it the active tape of the current thread; destroying it restores the
// previously active one. With no active tape, ops run in inference mode.
template <typename T>
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    std::size_t size() const { return entries_.size(); }

    // Called by ops. Marks output as requiring grad.
    void record(Tensor<T>& output, std::function<void()> backward);

    // Seeds d(loss)/d(loss) = 1 and replays the records in reverse. Leaf
    // gradients accumulate (+=) into existing grad slots. A tape can be
    // replayed once.
    void backward(const Tensor<T>& loss);

private:
    struct Entry {
        Tensor<T> output;
        std::function<void()> backward;
    };
    std::vector<Entry> entries_;
    Tape* previous_ = nullptr;
    bool consumed_ = false;
};

template <typename T>
void backward(const Tensor<T>& loss);  // on the active tape

// Suspends recording on this thread for its lifetime.
template <typename T>
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape<T>* saved_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// a: [..., k], b: [k, n] -> [..., n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise sum. b's shape must equal a trailing suffix of a's shape and is
// broadcast over the leading axes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

// Exact erf form: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

// Normalizes over the last axis, then applies gamma/beta. eps >= 0.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

template <typename T>
struct AttentionOutput {
    Tensor<T> output;   // [B?, q, v]
    Tensor<T> weights;  // [B?, heads, q, k], no gradient
};

// softmax(Q K^T / sqrt(d / heads)) V per head, heads concatenated along the
// last axis. Inputs are rank 2 ([rows, dim]) or rank 3 ([batch, rows, dim]);
// rank-2 operands are shared across the batch of the rank-3 ones.
template <typename T>
AttentionOutput<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k,
                                                const Tensor<T>& v, std::size_t heads);

// Mean over all elements of max(z,0) - z*t + log(1 + exp(-|z|)).
// targets must be 0/1 and shaped like logits.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);

template <typename T>
Tensor<T> mean(const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// [s...] -> [count, s...], copies repeated.
template <typename T>
Tensor<T> expand(const Tensor<T>& a, std::size_t count);

// [B, N, D] -> [B, D]
template <typename T>
Tensor<T> mean_axis1(const Tensor<T>& a);

// [B, N, D] -> [B, D]; gradient goes to the first maximal entry.
template <typename T>
Tensor<T> max_axis1(const Tensor<T>& a);

// [..., m] ++ [..., n] -> [..., m + n]
template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b);

// [B, n_i, D] for each part -> [B, sum n_i, D]
template <typename T>
Tensor<T> concat_axis1(std::span<const Tensor<T>> parts);

// [B, N, D] -> [B, D]
template <typename T>
Tensor<T> select_axis1(const Tensor<T>& a, std::size_t index);

// table [R, D], rows -> [rows.size(), D]; gradient scatter-adds.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> rows);

// Elementwise logistic; not differentiated.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);

} // namespace latentfuse
