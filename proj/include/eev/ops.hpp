#pragma once

// Differentiable operators over TensorT<T>. Every operator validates shapes,
// scans its output for NaN/Inf, and (when a tape is supplied) records a
// backward closure that accumulates into parent gradients.

#include <cmath>
#include <cstring>

#include "eev/kernels.hpp"
#include "eev/tensor.hpp"

namespace eev {

namespace detail {

template <typename T>
void require_same_shape(const TensorPtrT<T>& a, const TensorPtrT<T>& b, const char* opname) {
    if (a->shape != b->shape)
        throw ShapeError(std::string(opname) + ": shape mismatch " + a->shape.str() +
                         " vs " + b->shape.str());
}

enum class BroadcastKind { same, scalar, channel };

template <typename T>
BroadcastKind broadcast_kind(const TensorPtrT<T>& a, const TensorPtrT<T>& b, const char* opname) {
    if (a->shape == b->shape) return BroadcastKind::same;
    const Shape& s = b->shape;
    if (s.n == 1 && s.c == 1 && s.h == 1 && s.w == 1) return BroadcastKind::scalar;
    if (s.h == 1 && s.w == 1 && s.c == a->shape.c && (s.n == 1 || s.n == a->shape.n))
        return BroadcastKind::channel;
    throw ShapeError(std::string(opname) + ": cannot broadcast " + s.str() + " onto " +
                     a->shape.str());
}

template <typename T>
std::size_t broadcast_index(BroadcastKind k, const Shape& lhs, const Shape& rhs, std::size_t i) {
    switch (k) {
    case BroadcastKind::same: return i;
    case BroadcastKind::scalar: return 0;
    case BroadcastKind::channel: {
        const std::size_t plane = static_cast<std::size_t>(lhs.h) * lhs.w;
        const std::size_t c = (i / plane) % lhs.c;
        const std::size_t n = i / (plane * lhs.c);
        return (rhs.n == 1 ? c : n * lhs.c + c);
    }
    }
    return 0;
}

} // namespace detail

// ---- elementwise unary -----------------------------------------------------

template <typename T, typename FwdFn, typename BwdFn>
TensorPtrT<T> unary_op(GradTape<T>* tape, const TensorPtrT<T>& x, FwdFn f, BwdFn dfdx,
                       const char* opname) {
    auto out = make_tensor<T>(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = f(x->data[i]);
    check_finite(out, opname);
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin, dfdx] {
            if (!xin->requires_grad) return;
            for (std::size_t i = 0; i < xin->data.size(); ++i)
                xin->grad[i] += o->grad[i] * dfdx(xin->data[i], o->data[i]);
        }, opname);
    }
    return out;
}

template <typename T>
TensorPtrT<T> relu(GradTape<T>* tape, const TensorPtrT<T>& x) {
    return unary_op(tape, x,
                    [](T v) { return v > T(0) ? v : T(0); },
                    [](T v, T) { return v > T(0) ? T(1) : T(0); }, "relu");
}

template <typename T>
TensorPtrT<T> leaky_relu(GradTape<T>* tape, const TensorPtrT<T>& x, T slope) {
    return unary_op(tape, x,
                    [slope](T v) { return v > T(0) ? v : slope * v; },
                    [slope](T v, T) { return v > T(0) ? T(1) : slope; }, "leaky_relu");
}

template <typename T>
TensorPtrT<T> sigmoid(GradTape<T>* tape, const TensorPtrT<T>& x) {
    return unary_op(tape, x,
                    [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                    [](T, T y) { return y * (T(1) - y); }, "sigmoid");
}

template <typename T>
TensorPtrT<T> tanh_op(GradTape<T>* tape, const TensorPtrT<T>& x) {
    return unary_op(tape, x,
                    [](T v) { return std::tanh(v); },
                    [](T, T y) { return T(1) - y * y; }, "tanh");
}

template <typename T>
TensorPtrT<T> softplus(GradTape<T>* tape, const TensorPtrT<T>& x) {
    return unary_op(tape, x,
                    [](T v) { return v > T(20) ? v : std::log1p(std::exp(v)); },
                    [](T v, T) { return T(1) / (T(1) + std::exp(-v)); }, "softplus");
}

template <typename T>
TensorPtrT<T> log_op(GradTape<T>* tape, const TensorPtrT<T>& x) {
    return unary_op(tape, x,
                    [](T v) { return std::log(v); },
                    [](T v, T) { return T(1) / v; }, "log");
}

template <typename T>
TensorPtrT<T> neg(GradTape<T>* tape, const TensorPtrT<T>& x) {
    return unary_op(tape, x,
                    [](T v) { return -v; },
                    [](T, T) { return T(-1); }, "neg");
}

template <typename T>
TensorPtrT<T> mul_scalar(GradTape<T>* tape, const TensorPtrT<T>& x, T s) {
    return unary_op(tape, x,
                    [s](T v) { return v * s; },
                    [s](T, T) { return s; }, "mul_scalar");
}

template <typename T>
TensorPtrT<T> add_scalar(GradTape<T>* tape, const TensorPtrT<T>& x, T s) {
    return unary_op(tape, x,
                    [s](T v) { return v + s; },
                    [](T, T) { return T(1); }, "add_scalar");
}

template <typename T>
TensorPtrT<T> clamp_min(GradTape<T>* tape, const TensorPtrT<T>& x, T lo) {
    return unary_op(tape, x,
                    [lo](T v) { return v > lo ? v : lo; },
                    [lo](T v, T) { return v > lo ? T(1) : T(0); }, "clamp_min");
}

// x^p on a non-negative base; elements at or below zero are clamped to zero
// with zero gradient.
template <typename T>
TensorPtrT<T> pow_const(GradTape<T>* tape, const TensorPtrT<T>& x, T p) {
    return unary_op(tape, x,
                    [p](T v) { return v > T(0) ? std::pow(v, p) : T(0); },
                    [p](T v, T) { return v > T(0) ? p * std::pow(v, p - T(1)) : T(0); },
                    "pow_const");
}

// Standard normal CDF; d/dx is the normal pdf.
template <typename T>
TensorPtrT<T> normal_cdf(GradTape<T>* tape, const TensorPtrT<T>& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return unary_op(tape, x,
                    [](T v) { return static_cast<T>(0.5 * std::erfc(-static_cast<double>(v) * inv_sqrt2)); },
                    [](T v, T) {
                        const double d = static_cast<double>(v);
                        return static_cast<T>(inv_sqrt2pi * std::exp(-0.5 * d * d));
                    }, "normal_cdf");
}

// Round half away from zero; straight-through gradient.
template <typename T>
TensorPtrT<T> quantize_round(GradTape<T>* tape, const TensorPtrT<T>& x) {
    return unary_op(tape, x,
                    [](T v) { return std::round(v); },
                    [](T, T) { return T(1); }, "quantize_round");
}

// Additive uniform noise in (-0.5, 0.5); identity gradient.
template <typename T>
TensorPtrT<T> quantize_noise(GradTape<T>* tape, const TensorPtrT<T>& x, Rng& rng) {
    auto out = make_tensor<T>(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i)
        out->data[i] = x->data[i] + static_cast<T>(rng.uniform_noise());
    check_finite(out, "quantize_noise");
    if (tape) {
        auto xin = x;
        auto o = out;
        tape->record(out, {x}, [o, xin] {
            if (!xin->requires_grad) return;
            for (std::size_t i = 0; i < xin->data.size(); ++i) xin->grad[i] += o->grad[i];
        }, "quantize_noise");
    }
    return out;
}

// Fresh leaf with the same values; cuts the graph.
template <typename T>
TensorPtrT<T> detach(const TensorPtrT<T>& x) {
    return make_tensor<T>(x->shape, x->data);
}

// ---- elementwise binary (rhs may be scalar or per-channel) ------------------

template <typename T, typename FwdFn, typename DaFn, typename DbFn>
TensorPtrT<T> binary_op(GradTape<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b,
                        FwdFn f, DaFn dfda, DbFn dfdb, const char* opname) {
    const auto kind = detail::broadcast_kind(a, b, opname);
    auto out = make_tensor<T>(a->shape);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        const std::size_t j = detail::broadcast_index<T>(kind, a->shape, b->shape, i);
        out->data[i] = f(a->data[i], b->data[j]);
    }
    check_finite(out, opname);
    if (tape) {
        auto o = out;
        auto ain = a;
        auto bin = b;
        tape->record(out, {a, b}, [o, ain, bin, kind, dfda, dfdb] {
            for (std::size_t i = 0; i < ain->data.size(); ++i) {
                const std::size_t j = detail::broadcast_index<T>(kind, ain->shape, bin->shape, i);
                const T g = o->grad[i];
                if (ain->requires_grad) ain->grad[i] += g * dfda(ain->data[i], bin->data[j]);
                if (bin->requires_grad) bin->grad[j] += g * dfdb(ain->data[i], bin->data[j]);
            }
        }, opname);
    }
    return out;
}

template <typename T>
TensorPtrT<T> add(GradTape<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    return binary_op(tape, a, b,
                     [](T x, T y) { return x + y; },
                     [](T, T) { return T(1); },
                     [](T, T) { return T(1); }, "add");
}

template <typename T>
TensorPtrT<T> sub(GradTape<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    return binary_op(tape, a, b,
                     [](T x, T y) { return x - y; },
                     [](T, T) { return T(1); },
                     [](T, T) { return T(-1); }, "sub");
}

template <typename T>
TensorPtrT<T> mul(GradTape<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    return binary_op(tape, a, b,
                     [](T x, T y) { return x * y; },
                     [](T, T y) { return y; },
                     [](T x, T) { return x; }, "mul");
}

template <typename T>
TensorPtrT<T> div(GradTape<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    return binary_op(tape, a, b,
                     [](T x, T y) { return x / y; },
                     [](T, T y) { return T(1) / y; },
                     [](T x, T y) { return -x / (y * y); }, "div");
}

// ---- structural --------------------------------------------------------------

template <typename T>
TensorPtrT<T> concat_channels(GradTape<T>* tape, const std::vector<TensorPtrT<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape& s0 = parts[0]->shape;
    int ctot = 0;
    for (const auto& p : parts) {
        if (p->shape.n != s0.n || p->shape.h != s0.h || p->shape.w != s0.w)
            throw ShapeError("concat_channels: incompatible shape " + p->shape.str() +
                             " vs " + s0.str());
        ctot += p->shape.c;
    }
    auto out = make_tensor<T>(Shape(s0.n, ctot, s0.h, s0.w));
    const std::size_t plane = static_cast<std::size_t>(s0.h) * s0.w;
    for (int n = 0; n < s0.n; ++n) {
        std::size_t coff = 0;
        for (const auto& p : parts) {
            const std::size_t bytes = static_cast<std::size_t>(p->shape.c) * plane;
            std::copy_n(p->data.begin() + static_cast<std::size_t>(n) * bytes, bytes,
                        out->data.begin() + (static_cast<std::size_t>(n) * ctot + coff) * plane);
            coff += p->shape.c;
        }
    }
    if (tape) {
        auto o = out;
        auto ps = parts;
        tape->record(out, parts, [o, ps, plane, ctot] {
            const int n_count = o->shape.n;
            for (int n = 0; n < n_count; ++n) {
                std::size_t coff = 0;
                for (const auto& p : ps) {
                    const std::size_t bytes = static_cast<std::size_t>(p->shape.c) * plane;
                    if (p->requires_grad) {
                        const std::size_t src = (static_cast<std::size_t>(n) * ctot + coff) * plane;
                        const std::size_t dst = static_cast<std::size_t>(n) * bytes;
                        for (std::size_t i = 0; i < bytes; ++i) p->grad[dst + i] += o->grad[src + i];
                    }
                    coff += p->shape.c;
                }
            }
        }, "concat_channels");
    }
    return out;
}

template <typename T>
TensorPtrT<T> slice_channels(GradTape<T>* tape, const TensorPtrT<T>& x, int c0, int count) {
    if (c0 < 0 || count <= 0 || c0 + count > x->shape.c)
        throw ShapeError("slice_channels: range [" + std::to_string(c0) + "," +
                         std::to_string(c0 + count) + ") out of " + x->shape.str());
    auto out = make_tensor<T>(Shape(x->shape.n, count, x->shape.h, x->shape.w));
    const std::size_t plane = static_cast<std::size_t>(x->shape.h) * x->shape.w;
    for (int n = 0; n < x->shape.n; ++n)
        std::copy_n(x->data.begin() + (static_cast<std::size_t>(n) * x->shape.c + c0) * plane,
                    static_cast<std::size_t>(count) * plane,
                    out->data.begin() + static_cast<std::size_t>(n) * count * plane);
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin, c0, count, plane] {
            if (!xin->requires_grad) return;
            for (int n = 0; n < xin->shape.n; ++n) {
                const std::size_t src = static_cast<std::size_t>(n) * count * plane;
                const std::size_t dst = (static_cast<std::size_t>(n) * xin->shape.c + c0) * plane;
                for (std::size_t i = 0; i < static_cast<std::size_t>(count) * plane; ++i)
                    xin->grad[dst + i] += o->grad[src + i];
            }
        }, "slice_channels");
    }
    return out;
}

// Lossless (N,C,H,W) -> (N,C*r*r,H/r,W/r) rearrangement.
template <typename T>
TensorPtrT<T> space_to_depth(GradTape<T>* tape, const TensorPtrT<T>& x, int r) {
    if (x->shape.h % r != 0 || x->shape.w % r != 0)
        throw ShapeError("space_to_depth: dims " + x->shape.str() + " not divisible by " +
                         std::to_string(r));
    const Shape os(x->shape.n, x->shape.c * r * r, x->shape.h / r, x->shape.w / r);
    auto out = make_tensor<T>(os);
    for (int n = 0; n < x->shape.n; ++n)
        for (int c = 0; c < x->shape.c; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx)
                    for (int i = 0; i < os.h; ++i)
                        for (int j = 0; j < os.w; ++j)
                            out->at(n, (c * r + dy) * r + dx, i, j) =
                                x->at(n, c, i * r + dy, j * r + dx);
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin, r] {
            if (!xin->requires_grad) return;
            const Shape& os = o->shape;
            for (int n = 0; n < xin->shape.n; ++n)
                for (int c = 0; c < xin->shape.c; ++c)
                    for (int dy = 0; dy < r; ++dy)
                        for (int dx = 0; dx < r; ++dx)
                            for (int i = 0; i < os.h; ++i)
                                for (int j = 0; j < os.w; ++j)
                                    xin->grad[xin->index(n, c, i * r + dy, j * r + dx)] +=
                                        o->grad[o->index(n, (c * r + dy) * r + dx, i, j)];
        }, "space_to_depth");
    }
    return out;
}

template <typename T>
TensorPtrT<T> depth_to_space(GradTape<T>* tape, const TensorPtrT<T>& x, int r) {
    if (x->shape.c % (r * r) != 0)
        throw ShapeError("depth_to_space: channels of " + x->shape.str() +
                         " not divisible by " + std::to_string(r * r));
    const Shape os(x->shape.n, x->shape.c / (r * r), x->shape.h * r, x->shape.w * r);
    auto out = make_tensor<T>(os);
    for (int n = 0; n < os.n; ++n)
        for (int c = 0; c < os.c; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx)
                    for (int i = 0; i < x->shape.h; ++i)
                        for (int j = 0; j < x->shape.w; ++j)
                            out->at(n, c, i * r + dy, j * r + dx) =
                                x->at(n, (c * r + dy) * r + dx, i, j);
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin, r] {
            if (!xin->requires_grad) return;
            const Shape& os = o->shape;
            for (int n = 0; n < os.n; ++n)
                for (int c = 0; c < os.c; ++c)
                    for (int dy = 0; dy < r; ++dy)
                        for (int dx = 0; dx < r; ++dx)
                            for (int i = 0; i < xin->shape.h; ++i)
                                for (int j = 0; j < xin->shape.w; ++j)
                                    xin->grad[xin->index(n, (c * r + dy) * r + dx, i, j)] +=
                                        o->grad[o->index(n, c, i * r + dy, j * r + dx)];
        }, "depth_to_space");
    }
    return out;
}

// ---- spatial kernels ----------------------------------------------------------

template <typename T>
TensorPtrT<T> conv2d(GradTape<T>* tape, const TensorPtrT<T>& x, const TensorPtrT<T>& w,
                     const TensorPtrT<T>& b, int stride, int pad = -1) {
    const int k = w->shape.h;
    if (w->shape.w != k) throw ShapeError("conv2d: non-square kernel " + w->shape.str());
    if (x->shape.c != w->shape.c)
        throw ShapeError("conv2d: input channels " + std::to_string(x->shape.c) +
                         " != kernel Cin " + std::to_string(w->shape.c));
    if (b && (b->shape.c != w->shape.n || b->shape.n != 1 || b->shape.h != 1 || b->shape.w != 1))
        throw ShapeError("conv2d: bias shape " + b->shape.str() + " does not match Cout " +
                         std::to_string(w->shape.n));
    if (pad < 0) pad = (k - 1) / 2;
    kernels::Conv2dDims d{x->shape.n, x->shape.c, x->shape.h, x->shape.w,
                          w->shape.n, k, stride, pad};
    if (d.out_h() <= 0 || d.out_w() <= 0)
        throw ShapeError("conv2d: empty output for input " + x->shape.str());
    auto out = make_tensor<T>(Shape(d.n, d.cout, d.out_h(), d.out_w()));
    kernels::conv2d_forward(x->data.data(), w->data.data(), b ? b->data.data() : nullptr,
                            out->data.data(), d);
    check_finite(out, "conv2d");
    if (tape) {
        auto o = out;
        auto xin = x;
        auto win = w;
        auto bin = b;
        std::vector<TensorPtrT<T>> parents = b ? std::vector<TensorPtrT<T>>{x, w, b}
                                               : std::vector<TensorPtrT<T>>{x, w};
        tape->record(out, parents, [o, xin, win, bin, d] {
            if (xin->requires_grad)
                kernels::conv2d_backward_input(o->grad.data(), win->data.data(), xin->grad.data(), d);
            if (win->requires_grad)
                kernels::conv2d_backward_weight(o->grad.data(), xin->data.data(), win->grad.data(), d);
            if (bin && bin->requires_grad)
                kernels::conv2d_backward_bias(o->grad.data(), bin->grad.data(), d);
        }, "conv2d");
    }
    return out;
}

// Transposed convolution; weights [Cin, Cout, k, k], output stride*H x stride*W.
template <typename T>
TensorPtrT<T> deconv2d(GradTape<T>* tape, const TensorPtrT<T>& x, const TensorPtrT<T>& w,
                       const TensorPtrT<T>& b, int stride) {
    const int k = w->shape.h;
    if (w->shape.w != k) throw ShapeError("deconv2d: non-square kernel " + w->shape.str());
    if (stride != 1 && stride != 2)
        throw ShapeError("deconv2d: stride must be 1 or 2, got " + std::to_string(stride));
    if (x->shape.c != w->shape.n)
        throw ShapeError("deconv2d: input channels " + std::to_string(x->shape.c) +
                         " != kernel Cin " + std::to_string(w->shape.n));
    if (b && (b->shape.c != w->shape.c || b->shape.n != 1 || b->shape.h != 1 || b->shape.w != 1))
        throw ShapeError("deconv2d: bias shape " + b->shape.str() + " does not match Cout " +
                         std::to_string(w->shape.c));
    kernels::Deconv2dDims d{x->shape.n, x->shape.c, x->shape.h, x->shape.w,
                            w->shape.c, k, stride};
    auto out = make_tensor<T>(Shape(d.n, d.cout, d.out_h(), d.out_w()));
    kernels::deconv2d_forward(x->data.data(), w->data.data(), b ? b->data.data() : nullptr,
                              out->data.data(), d);
    check_finite(out, "deconv2d");
    if (tape) {
        auto o = out;
        auto xin = x;
        auto win = w;
        auto bin = b;
        std::vector<TensorPtrT<T>> parents = b ? std::vector<TensorPtrT<T>>{x, w, b}
                                               : std::vector<TensorPtrT<T>>{x, w};
        tape->record(out, parents, [o, xin, win, bin, d] {
            if (xin->requires_grad)
                kernels::deconv2d_backward_input(o->grad.data(), win->data.data(), xin->grad.data(), d);
            if (win->requires_grad)
                kernels::deconv2d_backward_weight(o->grad.data(), xin->data.data(), win->grad.data(), d);
            if (bin && bin->requires_grad)
                kernels::deconv2d_backward_bias(o->grad.data(), bin->grad.data(), d);
        }, "deconv2d");
    }
    return out;
}

template <typename T>
TensorPtrT<T> avg_pool2(GradTape<T>* tape, const TensorPtrT<T>& x) {
    if (x->shape.h % 2 != 0 || x->shape.w % 2 != 0)
        throw ShapeError("avg_pool2: odd spatial dims " + x->shape.str());
    auto out = make_tensor<T>(Shape(x->shape.n, x->shape.c, x->shape.h / 2, x->shape.w / 2));
    kernels::avg_pool2_forward(x->data.data(), out->data.data(),
                               x->shape.n, x->shape.c, x->shape.h, x->shape.w);
    check_finite(out, "avg_pool2");
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin] {
            if (!xin->requires_grad) return;
            kernels::avg_pool2_backward(o->grad.data(), xin->grad.data(),
                                        xin->shape.n, xin->shape.c, xin->shape.h, xin->shape.w);
        }, "avg_pool2");
    }
    return out;
}

template <typename T>
TensorPtrT<T> global_avg_pool(GradTape<T>* tape, const TensorPtrT<T>& x) {
    auto out = make_tensor<T>(Shape(x->shape.n, x->shape.c, 1, 1));
    kernels::global_avg_pool_forward(x->data.data(), out->data.data(),
                                     x->shape.n, x->shape.c, x->shape.h, x->shape.w);
    check_finite(out, "global_avg_pool");
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin] {
            if (!xin->requires_grad) return;
            kernels::global_avg_pool_backward(o->grad.data(), xin->grad.data(),
                                              xin->shape.n, xin->shape.c, xin->shape.h, xin->shape.w);
        }, "global_avg_pool");
    }
    return out;
}

template <typename T>
TensorPtrT<T> upsample_nearest2(GradTape<T>* tape, const TensorPtrT<T>& x) {
    auto out = make_tensor<T>(Shape(x->shape.n, x->shape.c, x->shape.h * 2, x->shape.w * 2));
    kernels::upsample_nearest2_forward(x->data.data(), out->data.data(),
                                       x->shape.n, x->shape.c, x->shape.h, x->shape.w);
    check_finite(out, "upsample_nearest2");
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin] {
            if (!xin->requires_grad) return;
            kernels::upsample_nearest2_backward(o->grad.data(), xin->grad.data(),
                                                xin->shape.n, xin->shape.c, xin->shape.h, xin->shape.w);
        }, "upsample_nearest2");
    }
    return out;
}

// Backward-warp with border clamping. flow channel 0 is the horizontal
// displacement in pixels, channel 1 vertical.
template <typename T>
TensorPtrT<T> bilinear_warp(GradTape<T>* tape, const TensorPtrT<T>& src, const TensorPtrT<T>& flow) {
    if (flow->shape.c != 2 || flow->shape.n != src->shape.n ||
        flow->shape.h != src->shape.h || flow->shape.w != src->shape.w)
        throw ShapeError("bilinear_warp: flow " + flow->shape.str() + " does not match source " +
                         src->shape.str());
    auto out = make_tensor<T>(src->shape);
    kernels::warp_forward(src->data.data(), flow->data.data(), out->data.data(),
                          src->shape.n, src->shape.c, src->shape.h, src->shape.w);
    check_finite(out, "bilinear_warp");
    if (tape) {
        auto o = out;
        auto s = src;
        auto f = flow;
        tape->record(out, {src, flow}, [o, s, f] {
            kernels::warp_backward(s->data.data(), f->data.data(), o->grad.data(),
                                   s->requires_grad ? s->grad.data() : nullptr,
                                   f->requires_grad ? f->grad.data() : nullptr,
                                   s->shape.n, s->shape.c, s->shape.h, s->shape.w);
        }, "bilinear_warp");
    }
    return out;
}

// ---- reductions ---------------------------------------------------------------

template <typename T>
TensorPtrT<T> sum(GradTape<T>* tape, const TensorPtrT<T>& x) {
    T acc = T(0);
    for (const T v : x->data) acc += v;
    auto out = scalar_tensor<T>(acc);
    check_finite(out, "sum");
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin] {
            if (!xin->requires_grad) return;
            const T g = o->grad[0];
            for (std::size_t i = 0; i < xin->data.size(); ++i) xin->grad[i] += g;
        }, "sum");
    }
    return out;
}

template <typename T>
TensorPtrT<T> mean(GradTape<T>* tape, const TensorPtrT<T>& x) {
    const T inv = T(1) / static_cast<T>(x->data.size());
    T acc = T(0);
    for (const T v : x->data) acc += v;
    auto out = scalar_tensor<T>(acc * inv);
    check_finite(out, "mean");
    if (tape) {
        auto o = out;
        auto xin = x;
        tape->record(out, {x}, [o, xin, inv] {
            if (!xin->requires_grad) return;
            const T g = o->grad[0] * inv;
            for (std::size_t i = 0; i < xin->data.size(); ++i) xin->grad[i] += g;
        }, "mean");
    }
    return out;
}

// ---- composites ----------------------------------------------------------------

template <typename T>
TensorPtrT<T> mse(GradTape<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    detail::require_same_shape(a, b, "mse");
    auto d = sub(tape, a, b);
    return mean(tape, mul(tape, d, d));
}

// Nearest-neighbor x2 upsampling of a flow field with the displacement
// magnitudes doubled to match the finer grid.
template <typename T>
TensorPtrT<T> upsample_flow2(GradTape<T>* tape, const TensorPtrT<T>& flow) {
    return mul_scalar(tape, upsample_nearest2(tape, flow), T(2));
}

} // namespace eev
