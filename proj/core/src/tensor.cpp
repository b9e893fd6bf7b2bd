#include "latentfuse/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace latentfuse {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
thread_local Tape<T>* g_active_tape = nullptr;

template <typename T, typename... Inputs>
Tape<T>* recording_tape(const Inputs&... inputs) {
    Tape<T>* tape = Tape<T>::active();
    if (tape == nullptr) return nullptr;
    return (inputs.requires_grad() || ...) ? tape : nullptr;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    for (T v : t.data()) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string(op) + ": non-finite value in output " +
                                 shape_string(t.shape()));
        }
    }
}

template <typename T>
Tensor<T> empty_like_shape(Shape shape) {
    const std::size_t n = shape_size(shape);
    return Tensor<T>(std::move(shape), std::vector<T>(n));
}

[[noreturn]] void dimension_error(const std::string& op, const std::string& what) {
    throw DimensionError(op + ": " + what);
}

} // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    if (shape_size(shape) != data.size()) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_string(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data.assign(data.begin(), data.end());
    impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
    if (size() != 1) throw ContractError("item() on a tensor of shape " + shape_string(shape()));
    return impl_->data[0];
}

template <typename T>
std::span<T> Tensor<T>::grad_buffer() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    Tensor out;
    out.impl_ = std::make_shared<detail::TensorImpl<T>>();
    out.impl_->shape = impl_->shape;
    out.impl_->data = impl_->data;
    return out;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

template <typename T>
Tape<T>::Tape() : previous_(g_active_tape<T>) {
    g_active_tape<T> = this;
}

template <typename T>
Tape<T>::~Tape() {
    g_active_tape<T> = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
    return g_active_tape<T>;
}

template <typename T>
void Tape<T>::record(Tensor<T>& output, std::function<void()> backward) {
    output.impl_->requires_grad = true;
    output.impl_->tape = this;
    output.impl_->tape_index = entries_.size();
    entries_.push_back(Entry{output, std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
    if (consumed_) throw ContractError("backward: tape already replayed");
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward: loss must be a scalar, got " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
    }
    if (loss.impl_->tape != this) throw ContractError("backward: loss was not recorded on this tape");
    consumed_ = true;
    Tensor<T> seed = loss;
    seed.grad_buffer()[0] += T(1);
    for (std::size_t i = loss.impl_->tape_index + 1; i-- > 0;) {
        Entry& e = entries_[i];
        if (e.output.has_grad()) e.backward();
    }
}

template <typename T>
NoGradScope<T>::NoGradScope() : saved_(g_active_tape<T>) {
    g_active_tape<T> = nullptr;
}

template <typename T>
NoGradScope<T>::~NoGradScope() {
    g_active_tape<T> = saved_;
}

template <typename T>
void backward(const Tensor<T>& loss) {
    Tape<T>* tape = Tape<T>::active();
    if (tape == nullptr) throw ContractError("backward: no active tape");
    tape->backward(loss);
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (b.rank() != 2) dimension_error("matmul", "right operand must be rank 2, got " + shape_string(b.shape()));
    const std::size_t k = b.dim(0);
    const std::size_t n = b.dim(1);
    if (a.shape().back() != k) {
        dimension_error("matmul", "inner dimensions differ: " + shape_string(a.shape()) + " x " +
                                      shape_string(b.shape()));
    }
    const std::size_t m = a.size() / k;
    Shape out_shape = a.shape();
    out_shape.back() = n;
    Tensor<T> out = empty_like_shape<T>(out_shape);
    {
        ConstMatMap<T> A(a.data().data(), m, k);
        ConstMatMap<T> B(b.data().data(), k, n);
        MatMap<T> C(out.mutable_data().data(), m, n);
        C.noalias() = A * B;
    }
    check_finite(out, "matmul");
    if (auto* tape = recording_tape<T>(a, b)) {
        tape->record(out, [a, b, out, m, k, n]() mutable {
            ConstMatMap<T> G(out.grad().data(), m, n);
            if (a.requires_grad()) {
                MatMap<T> dA(a.grad_buffer().data(), m, k);
                dA.noalias() += G * ConstMatMap<T>(b.data().data(), k, n).transpose();
            }
            if (b.requires_grad()) {
                MatMap<T> dB(b.grad_buffer().data(), k, n);
                dB.noalias() += ConstMatMap<T>(a.data().data(), m, k).transpose() * G;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
        dimension_error("add", "cannot broadcast " + shape_string(bs) + " onto " + shape_string(as));
    }
    const std::size_t inner = b.size();
    const std::size_t reps = a.size() / inner;
    Tensor<T> out = empty_like_shape<T>(as);
    {
        auto o = out.mutable_data();
        auto ad = a.data();
        auto bd = b.data();
        for (std::size_t r = 0; r < reps; ++r) {
            const std::size_t base = r * inner;
            for (std::size_t i = 0; i < inner; ++i) o[base + i] = ad[base + i] + bd[i];
        }
    }
    check_finite(out, "add");
    if (auto* tape = recording_tape<T>(a, b)) {
        tape->record(out, [a, b, out, inner, reps]() mutable {
            auto g = out.grad();
            if (a.requires_grad()) {
                auto da = a.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (b.requires_grad()) {
                auto db = b.grad_buffer();
                for (std::size_t r = 0; r < reps; ++r) {
                    const std::size_t base = r * inner;
                    for (std::size_t i = 0; i < inner; ++i) db[i] += g[base + i];
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    Tensor<T> out = empty_like_shape<T>(a.shape());
    {
        auto o = out.mutable_data();
        auto ad = a.data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] * factor;
    }
    check_finite(out, "scale");
    if (auto* tape = recording_tape<T>(a)) {
        tape->record(out, [a, out, factor]() mutable {
            auto g = out.grad();
            auto da = a.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * factor;
        });
    }
    return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out = empty_like_shape<T>(x.shape());
    const T inv_sqrt2 = T(1) / std::sqrt(T(2));
    {
        auto o = out.mutable_data();
        auto xd = x.data();
        for (std::size_t i = 0; i < o.size(); ++i) {
            o[i] = xd[i] * T(0.5) * (T(1) + std::erf(xd[i] * inv_sqrt2));
        }
    }
    check_finite(out, "gelu");
    if (auto* tape = recording_tape<T>(x)) {
        tape->record(out, [x, out, inv_sqrt2]() mutable {
            const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
            auto g = out.grad();
            auto xd = x.data();
            auto dx = x.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T v = xd[i];
                const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
                const T pdf = std::exp(T(-0.5) * v * v) * inv_sqrt_2pi;
                dx[i] += g[i] * (cdf + v * pdf);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    if (!(eps >= T(0))) throw ContractError("layer_norm: eps must be non-negative");
    const std::size_t d = x.shape().back();
    if (gamma.size() != d || beta.size() != d) {
        dimension_error("layer_norm", "affine parameters " + shape_string(gamma.shape()) + "/" +
                                          shape_string(beta.shape()) + " do not match last axis of " +
                                          shape_string(x.shape()));
    }
    const std::size_t rows = x.size() / d;
    Tensor<T> out = empty_like_shape<T>(x.shape());
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto rstd = std::make_shared<std::vector<T>>(rows);
    {
        auto xd = x.data();
        auto o = out.mutable_data();
        auto gd = gamma.data();
        auto bd = beta.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const T* row = xd.data() + r * d;
            T mu = 0;
            for (std::size_t i = 0; i < d; ++i) mu += row[i];
            mu /= T(d);
            T var = 0;
            for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
            var /= T(d);
            const T rs = T(1) / std::sqrt(var + eps);
            (*rstd)[r] = rs;
            for (std::size_t i = 0; i < d; ++i) {
                const T h = (row[i] - mu) * rs;
                (*xhat)[r * d + i] = h;
                o[r * d + i] = h * gd[i] + bd[i];
            }
        }
    }
    check_finite(out, "layer_norm");
    if (auto* tape = recording_tape<T>(x, gamma, beta)) {
        tape->record(out, [x, gamma, beta, out, xhat, rstd, rows, d]() mutable {
            auto g = out.grad();
            auto gd = gamma.data();
            if (gamma.requires_grad()) {
                auto dg = gamma.grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < d; ++i) dg[i] += g[r * d + i] * (*xhat)[r * d + i];
            }
            if (beta.requires_grad()) {
                auto db = beta.grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < d; ++i) db[i] += g[r * d + i];
            }
            if (x.requires_grad()) {
                auto dx = x.grad_buffer();
                for (std::size_t r = 0; r < rows; ++r) {
                    T mean_dh = 0;
                    T mean_dh_h = 0;
                    for (std::size_t i = 0; i < d; ++i) {
                        const T dh = g[r * d + i] * gd[i];
                        mean_dh += dh;
                        mean_dh_h += dh * (*xhat)[r * d + i];
                    }
                    mean_dh /= T(d);
                    mean_dh_h /= T(d);
                    const T rs = (*rstd)[r];
                    for (std::size_t i = 0; i < d; ++i) {
                        const T dh = g[r * d + i] * gd[i];
                        dx[r * d + i] += rs * (dh - mean_dh - (*xhat)[r * d + i] * mean_dh_h);
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
AttentionOutput<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                                std::size_t heads) {
    const char* op = "scaled_dot_product_attention";
    for (const Tensor<T>* t : {&q, &k, &v}) {
        if (t->rank() != 2 && t->rank() != 3) {
            dimension_error(op, "operands must be rank 2 or 3, got " + shape_string(t->shape()));
        }
    }
    auto batch_of = [](const Tensor<T>& t) -> std::size_t { return t.rank() == 3 ? t.dim(0) : 0; };
    std::size_t batch = 0;
    for (const Tensor<T>* t : {&q, &k, &v}) {
        const std::size_t b = batch_of(*t);
        if (b == 0) continue;
        if (batch != 0 && batch != b) dimension_error(op, "batch sizes differ");
        batch = b;
    }
    const bool batched = batch != 0;
    if (!batched) batch = 1;

    const std::size_t nq = q.dim(q.rank() - 2);
    const std::size_t d = q.dim(q.rank() - 1);
    const std::size_t nk = k.dim(k.rank() - 2);
    const std::size_t dv = v.dim(v.rank() - 1);
    if (k.dim(k.rank() - 1) != d) dimension_error(op, "query/key widths differ");
    if (v.dim(v.rank() - 2) != nk) dimension_error(op, "key/value row counts differ");
    if (heads == 0 || d % heads != 0 || dv % heads != 0) {
        throw ConfigurationError(std::string(op) + ": width " + std::to_string(d) + "/" + std::to_string(dv) +
                                 " not divisible by " + std::to_string(heads) + " heads");
    }
    // Unreachable through Tensor, whose dimensions are positive; kept so the
    // op states its own precondition.
    if (nk == 0) throw ContractError(std::string(op) + ": empty key sequence");

    const std::size_t dh = d / heads;
    const std::size_t dvh = dv / heads;
    const T scale_factor = T(1) / std::sqrt(T(dh));

    Shape out_shape = batched ? Shape{batch, nq, dv} : Shape{nq, dv};
    Shape w_shape = batched ? Shape{batch, heads, nq, nk} : Shape{heads, nq, nk};
    Tensor<T> out = empty_like_shape<T>(out_shape);
    Tensor<T> weights = empty_like_shape<T>(w_shape);

    const std::size_t q_stride = q.rank() == 3 ? nq * d : 0;
    const std::size_t k_stride = k.rank() == 3 ? nk * d : 0;
    const std::size_t v_stride = v.rank() == 3 ? nk * dv : 0;

    {
        const T* qd = q.data().data();
        const T* kd = k.data().data();
        const T* vd = v.data().data();
        T* od = out.mutable_data().data();
        T* wd = weights.mutable_data().data();
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t h = 0; h < heads; ++h) {
                ConstStridedMap<T> Qh(qd + b * q_stride + h * dh, nq, dh, Eigen::OuterStride<>(d));
                ConstStridedMap<T> Kh(kd + b * k_stride + h * dh, nk, dh, Eigen::OuterStride<>(d));
                ConstStridedMap<T> Vh(vd + b * v_stride + h * dvh, nk, dvh, Eigen::OuterStride<>(dv));
                MatMap<T> A(wd + (b * heads + h) * nq * nk, nq, nk);
                A.noalias() = (Qh * Kh.transpose()) * scale_factor;
                for (std::size_t i = 0; i < nq; ++i) {
                    auto row = A.row(i);
                    const T mx = row.maxCoeff();
                    row = (row.array() - mx).exp();
                    row /= row.sum();
                }
                StridedMap<T> Oh(od + b * nq * dv + h * dvh, nq, dvh, Eigen::OuterStride<>(dv));
                Oh.noalias() = A * Vh;
            }
        }
    }
    check_finite(out, op);

    if (auto* tape = recording_tape<T>(q, k, v)) {
        tape->record(out, [q, k, v, out, weights, batch, heads, nq, nk, d, dv, dh, dvh, q_stride, k_stride,
                           v_stride, scale_factor]() mutable {
            const T* g = out.grad().data();
            const T* wd = weights.data().data();
            const T* qd = q.data().data();
            const T* kd = k.data().data();
            const T* vd = v.data().data();
            T* dq = q.requires_grad() ? q.grad_buffer().data() : nullptr;
            T* dk = k.requires_grad() ? k.grad_buffer().data() : nullptr;
            T* dvp = v.requires_grad() ? v.grad_buffer().data() : nullptr;
            RowMat<T> dA(nq, nk);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t h = 0; h < heads; ++h) {
                    ConstMatMap<T> A(wd + (b * heads + h) * nq * nk, nq, nk);
                    ConstStridedMap<T> G(g + b * nq * dv + h * dvh, nq, dvh, Eigen::OuterStride<>(dv));
                    ConstStridedMap<T> Vh(vd + b * v_stride + h * dvh, nk, dvh, Eigen::OuterStride<>(dv));
                    if (dvp) {
                        StridedMap<T> dV(dvp + b * v_stride + h * dvh, nk, dvh, Eigen::OuterStride<>(dv));
                        dV.noalias() += A.transpose() * G;
                    }
                    if (!dq && !dk) continue;
                    dA.noalias() = G * Vh.transpose();
                    // softmax backward: dS = A * (dA - rowsum(A * dA))
                    for (std::size_t i = 0; i < nq; ++i) {
                        const T dot = A.row(i).dot(dA.row(i));
                        dA.row(i) = (A.row(i).array() * (dA.row(i).array() - dot)).matrix();
                    }
                    dA *= scale_factor;
                    if (dq) {
                        ConstStridedMap<T> Kh(kd + b * k_stride + h * dh, nk, dh, Eigen::OuterStride<>(d));
                        StridedMap<T> dQ(dq + b * q_stride + h * dh, nq, dh, Eigen::OuterStride<>(d));
                        dQ.noalias() += dA * Kh;
                    }
                    if (dk) {
                        ConstStridedMap<T> Qh(qd + b * q_stride + h * dh, nq, dh, Eigen::OuterStride<>(d));
                        StridedMap<T> dK(dk + b * k_stride + h * dh, nk, dh, Eigen::OuterStride<>(d));
                        dK.noalias() += dA.transpose() * Qh;
                    }
                }
            }
        });
    }
    return AttentionOutput<T>{std::move(out), std::move(weights)};
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
    if (logits.shape() != targets.shape()) {
        dimension_error("bce_with_logits", "logits " + shape_string(logits.shape()) + " vs targets " +
                                               shape_string(targets.shape()));
    }
    for (T t : targets.data()) {
        if (t != T(0) && t != T(1)) throw ValidationError("bce_with_logits: targets must be 0 or 1");
    }
    const std::size_t n = logits.size();
    T total = 0;
    {
        auto z = logits.data();
        auto t = targets.data();
        for (std::size_t i = 0; i < n; ++i) {
            total += std::max(z[i], T(0)) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
        }
    }
    Tensor<T> out = Tensor<T>::scalar(total / T(n));
    check_finite(out, "bce_with_logits");
    if (auto* tape = recording_tape<T>(logits)) {
        tape->record(out, [logits, targets, out, n]() mutable {
            const T g = out.grad()[0] / T(n);
            auto z = logits.data();
            auto t = targets.data();
            auto dz = logits.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const T s = z[i] >= 0 ? T(1) / (T(1) + std::exp(-z[i])) : std::exp(z[i]) / (T(1) + std::exp(z[i]));
                dz[i] += g * (s - t[i]);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T total = 0;
    for (T x : a.data()) total += x;
    Tensor<T> out = Tensor<T>::scalar(total);
    check_finite(out, "sum");
    if (auto* tape = recording_tape<T>(a)) {
        tape->record(out, [a, out]() mutable {
            const T g = out.grad()[0];
            for (T& x : a.grad_buffer()) x += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    return scale(sum(a), T(1) / T(a.size()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        dimension_error("reshape", "cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
    }
    Tensor<T> out(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()));
    if (auto* tape = recording_tape<T>(a)) {
        tape->record(out, [a, out]() mutable {
            auto g = out.grad();
            auto da = a.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> expand(const Tensor<T>& a, std::size_t count) {
    Shape shape{count};
    shape.insert(shape.end(), a.shape().begin(), a.shape().end());
    const std::size_t n = a.size();
    std::vector<T> data(n * count);
    for (std::size_t c = 0; c < count; ++c) std::copy(a.data().begin(), a.data().end(), data.begin() + c * n);
    Tensor<T> out(std::move(shape), std::move(data));
    if (auto* tape = recording_tape<T>(a)) {
        tape->record(out, [a, out, count, n]() mutable {
            auto g = out.grad();
            auto da = a.grad_buffer();
            for (std::size_t c = 0; c < count; ++c)
                for (std::size_t i = 0; i < n; ++i) da[i] += g[c * n + i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean_axis1(const Tensor<T>& a) {
    if (a.rank() != 3) dimension_error("mean_axis1", "expects rank 3, got " + shape_string(a.shape()));
    const std::size_t B = a.dim(0), N = a.dim(1), D = a.dim(2);
    Tensor<T> out = Tensor<T>::zeros({B, D});
    {
        auto o = out.mutable_data();
        auto ad = a.data();
        // Sorted column sums: bit-exact under any permutation along axis 1.
        std::vector<T> column(N);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < D; ++i) {
                for (std::size_t n = 0; n < N; ++n) column[n] = ad[(b * N + n) * D + i];
                std::sort(column.begin(), column.end());
                T s = T(0);
                for (T x : column) s += x;
                o[b * D + i] = s / T(N);
            }
        }
    }
    check_finite(out, "mean_axis1");
    if (auto* tape = recording_tape<T>(a)) {
        tape->record(out, [a, out, B, N, D]() mutable {
            auto g = out.grad();
            auto da = a.grad_buffer();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t i = 0; i < D; ++i) da[(b * N + n) * D + i] += g[b * D + i] / T(N);
        });
    }
    return out;
}

template <typename T>
Tensor<T> max_axis1(const Tensor<T>& a) {
    if (a.rank() != 3) dimension_error("max_axis1", "expects rank 3, got " + shape_string(a.shape()));
    const std::size_t B = a.dim(0), N = a.dim(1), D = a.dim(2);
    Tensor<T> out = empty_like_shape<T>({B, D});
    auto argmax = std::make_shared<std::vector<std::size_t>>(B * D, 0);
    {
        auto o = out.mutable_data();
        auto ad = a.data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < D; ++i) {
                std::size_t best = 0;
                T value = ad[(b * N) * D + i];
                for (std::size_t n = 1; n < N; ++n) {
                    const T x = ad[(b * N + n) * D + i];
                    if (x > value) {
                        value = x;
                        best = n;
                    }
                }
                o[b * D + i] = value;
                (*argmax)[b * D + i] = best;
            }
        }
    }
    check_finite(out, "max_axis1");
    if (auto* tape = recording_tape<T>(a)) {
        tape->record(out, [a, out, argmax, B, N, D]() mutable {
            auto g = out.grad();
            auto da = a.grad_buffer();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t i = 0; i < D; ++i) da[(b * N + (*argmax)[b * D + i]) * D + i] += g[b * D + i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != b.rank() || !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
        dimension_error("concat_last", "leading axes differ: " + shape_string(a.shape()) + " vs " +
                                           shape_string(b.shape()));
    }
    const std::size_t m = a.shape().back();
    const std::size_t n = b.shape().back();
    const std::size_t rows = a.size() / m;
    Shape shape = a.shape();
    shape.back() = m + n;
    Tensor<T> out = empty_like_shape<T>(shape);
    {
        auto o = out.mutable_data();
        auto ad = a.data();
        auto bd = b.data();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(ad.begin() + r * m, m, o.begin() + r * (m + n));
            std::copy_n(bd.begin() + r * n, n, o.begin() + r * (m + n) + m);
        }
    }
    if (auto* tape = recording_tape<T>(a, b)) {
        tape->record(out, [a, b, out, m, n, rows]() mutable {
            auto g = out.grad();
            if (a.requires_grad()) {
                auto da = a.grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < m; ++i) da[r * m + i] += g[r * (m + n) + i];
            }
            if (b.requires_grad()) {
                auto db = b.grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < n; ++i) db[r * n + i] += g[r * (m + n) + m + i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat_axis1(std::span<const Tensor<T>> parts) {
    if (parts.empty()) throw ContractError("concat_axis1: no parts");
    const std::size_t B = parts[0].dim(0);
    const std::size_t D = parts[0].shape().back();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 3 || p.dim(0) != B || p.dim(2) != D) {
            dimension_error("concat_axis1", "part " + shape_string(p.shape()) + " incompatible with batch " +
                                                std::to_string(B) + " width " + std::to_string(D));
        }
        total += p.dim(1);
    }
    Tensor<T> out = empty_like_shape<T>({B, total, D});
    {
        auto o = out.mutable_data();
        for (std::size_t b = 0; b < B; ++b) {
            std::size_t offset = 0;
            for (const auto& p : parts) {
                const std::size_t n = p.dim(1);
                std::copy_n(p.data().begin() + b * n * D, n * D, o.begin() + (b * total + offset) * D);
                offset += n;
            }
        }
    }
    bool any = false;
    for (const auto& p : parts) any = any || p.requires_grad();
    Tape<T>* tape = any ? Tape<T>::active() : nullptr;
    if (tape) {
        std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
        tape->record(out, [inputs, out, B, D, total]() mutable {
            auto g = out.grad();
            std::size_t offset = 0;
            for (auto& p : inputs) {
                const std::size_t n = p.dim(1);
                if (p.requires_grad()) {
                    auto dp = p.grad_buffer();
                    for (std::size_t b = 0; b < B; ++b)
                        for (std::size_t i = 0; i < n * D; ++i) dp[b * n * D + i] += g[(b * total + offset) * D + i];
                }
                offset += n;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> select_axis1(const Tensor<T>& a, std::size_t index) {
    if (a.rank() != 3 || index >= a.dim(1)) {
        dimension_error("select_axis1", "index " + std::to_string(index) + " into " + shape_string(a.shape()));
    }
    const std::size_t B = a.dim(0), N = a.dim(1), D = a.dim(2);
    Tensor<T> out = empty_like_shape<T>({B, D});
    {
        auto o = out.mutable_data();
        for (std::size_t b = 0; b < B; ++b) std::copy_n(a.data().begin() + (b * N + index) * D, D, o.begin() + b * D);
    }
    if (auto* tape = recording_tape<T>(a)) {
        tape->record(out, [a, out, index, B, N, D]() mutable {
            auto g = out.grad();
            auto da = a.grad_buffer();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t i = 0; i < D; ++i) da[(b * N + index) * D + i] += g[b * D + i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> rows) {
    if (table.rank() != 2) dimension_error("gather_rows", "table must be rank 2");
    if (rows.empty()) throw ContractError("gather_rows: no rows requested");
    const std::size_t R = table.dim(0), D = table.dim(1);
    for (auto r : rows) {
        if (r >= R) dimension_error("gather_rows", "row " + std::to_string(r) + " outside table of " + std::to_string(R));
    }
    Tensor<T> out = empty_like_shape<T>({rows.size(), D});
    {
        auto o = out.mutable_data();
        for (std::size_t i = 0; i < rows.size(); ++i)
            std::copy_n(table.data().begin() + rows[i] * D, D, o.begin() + i * D);
    }
    if (auto* tape = recording_tape<T>(table)) {
        std::vector<std::size_t> idx(rows.begin(), rows.end());
        tape->record(out, [table, out, idx = std::move(idx), D]() mutable {
            auto g = out.grad();
            auto dt = table.grad_buffer();
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < D; ++j) dt[idx[i] * D + j] += g[i * D + j];
        });
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    Tensor<T> out = empty_like_shape<T>(a.shape());
    auto o = out.mutable_data();
    auto ad = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const T z = ad[i];
        o[i] = z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
    }
    return out;
}

#define LATENTFUSE_INSTANTIATE(T)                                                                              \
    template class Tensor<T>;                                                                                  \
    template class Tape<T>;                                                                                    \
    template class NoGradScope<T>;                                                                             \
    template void backward<T>(const Tensor<T>&);                                                               \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                          \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                             \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                                          \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                                              \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                 \
    template AttentionOutput<T> scaled_dot_product_attention<T>(const Tensor<T>&, const Tensor<T>&,            \
                                                                const Tensor<T>&, std::size_t);                \
    template Tensor<T> bce_with_logits<T>(const Tensor<T>&, const Tensor<T>&);                                 \
    template Tensor<T> sum<T>(const Tensor<T>&);                                                               \
    template Tensor<T> mean<T>(const Tensor<T>&);                                                              \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                                    \
    template Tensor<T> expand<T>(const Tensor<T>&, std::size_t);                                               \
    template Tensor<T> mean_axis1<T>(const Tensor<T>&);                                                        \
    template Tensor<T> max_axis1<T>(const Tensor<T>&);                                                         \
    template Tensor<T> concat_last<T>(const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> concat_axis1<T>(std::span<const Tensor<T>>);                                            \
    template Tensor<T> select_axis1<T>(const Tensor<T>&, std::size_t);                                         \
    template Tensor<T> gather_rows<T>(const Tensor<T>&, std::span<const std::size_t>);                         \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);

LATENTFUSE_INSTANTIATE(float)
LATENTFUSE_INSTANTIATE(double)

#undef LATENTFUSE_INSTANTIATE

} // namespace latentfuse
