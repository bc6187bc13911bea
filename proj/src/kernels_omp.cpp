#include "eev/kernels.hpp"

#include <algorithm>
#include <cmath>

// OpenMP versions. Work is split over independent output slices; the
// per-element accumulation order matches the serial reference exactly, so
// results are bit-identical regardless of thread count.

namespace eev::kernels::omp {

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const Conv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w();
    const long long total = static_cast<long long>(d.n) * d.cout * oh_n;
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const int oh = static_cast<int>(idx % oh_n);
        const int co = static_cast<int>((idx / oh_n) % d.cout);
        const int n = static_cast<int>(idx / (static_cast<long long>(oh_n) * d.cout));
        for (int ow = 0; ow < ow_n; ++ow) {
            T acc = b ? b[co] : T(0);
            for (int ci = 0; ci < d.cin; ++ci) {
                for (int kh = 0; kh < d.k; ++kh) {
                    const int ih = oh * d.stride - d.pad + kh;
                    if (ih < 0 || ih >= d.h) continue;
                    for (int kw = 0; kw < d.k; ++kw) {
                        const int iw = ow * d.stride - d.pad + kw;
                        if (iw < 0 || iw >= d.w) continue;
                        acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + ih) * d.w + iw] *
                               w[((static_cast<std::size_t>(co) * d.cin + ci) * d.k + kh) * d.k + kw];
                    }
                }
            }
            y[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + oh) * ow_n + ow] = acc;
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const Conv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w();
    const long long total = static_cast<long long>(d.n) * d.cin * d.h;
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const int ih = static_cast<int>(idx % d.h);
        const int ci = static_cast<int>((idx / d.h) % d.cin);
        const int n = static_cast<int>(idx / (static_cast<long long>(d.h) * d.cin));
        for (int iw = 0; iw < d.w; ++iw) {
            T acc = T(0);
            for (int co = 0; co < d.cout; ++co) {
                for (int kh = 0; kh < d.k; ++kh) {
                    const int t = ih + d.pad - kh;
                    if (t < 0 || t % d.stride != 0) continue;
                    const int oh = t / d.stride;
                    if (oh >= oh_n) continue;
                    for (int kw = 0; kw < d.k; ++kw) {
                        const int u = iw + d.pad - kw;
                        if (u < 0 || u % d.stride != 0) continue;
                        const int ow = u / d.stride;
                        if (ow >= ow_n) continue;
                        acc += gy[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + oh) * ow_n + ow] *
                               w[((static_cast<std::size_t>(co) * d.cin + ci) * d.k + kh) * d.k + kw];
                    }
                }
            }
            gx[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + ih) * d.w + iw] += acc;
        }
    }
}

template <typename T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw, const Conv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w();
    const long long total = static_cast<long long>(d.cout) * d.cin * d.k * d.k;
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const int kw = static_cast<int>(idx % d.k);
        const int kh = static_cast<int>((idx / d.k) % d.k);
        const int ci = static_cast<int>((idx / (static_cast<long long>(d.k) * d.k)) % d.cin);
        const int co = static_cast<int>(idx / (static_cast<long long>(d.k) * d.k * d.cin));
        T acc = T(0);
        for (int n = 0; n < d.n; ++n) {
            for (int oh = 0; oh < oh_n; ++oh) {
                const int ih = oh * d.stride - d.pad + kh;
                if (ih < 0 || ih >= d.h) continue;
                for (int ow = 0; ow < ow_n; ++ow) {
                    const int iw = ow * d.stride - d.pad + kw;
                    if (iw < 0 || iw >= d.w) continue;
                    acc += gy[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + oh) * ow_n + ow] *
                           x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + ih) * d.w + iw];
                }
            }
        }
        gw[((static_cast<std::size_t>(co) * d.cin + ci) * d.k + kh) * d.k + kw] += acc;
    }
}

template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const Conv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w();
#pragma omp parallel for schedule(static)
    for (int co = 0; co < d.cout; ++co) {
        T acc = T(0);
        for (int n = 0; n < d.n; ++n)
            for (int oh = 0; oh < oh_n; ++oh)
                for (int ow = 0; ow < ow_n; ++ow)
                    acc += gy[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + oh) * ow_n + ow];
        gb[co] += acc;
    }
}

template <typename T>
void deconv2d_forward(const T* x, const T* w, const T* b, T* y, const Deconv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w(), pad = d.pad();
    const long long total = static_cast<long long>(d.n) * d.cout * oh_n;
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const int ih = static_cast<int>(idx % oh_n);
        const int co = static_cast<int>((idx / oh_n) % d.cout);
        const int n = static_cast<int>(idx / (static_cast<long long>(oh_n) * d.cout));
        for (int iw = 0; iw < ow_n; ++iw) {
            T acc = b ? b[co] : T(0);
            for (int ci = 0; ci < d.cin; ++ci) {
                for (int kh = 0; kh < d.k; ++kh) {
                    const int t = ih + pad - kh;
                    if (t < 0 || t % d.stride != 0) continue;
                    const int oh = t / d.stride;
                    if (oh >= d.h) continue;
                    for (int kw = 0; kw < d.k; ++kw) {
                        const int u = iw + pad - kw;
                        if (u < 0 || u % d.stride != 0) continue;
                        const int ow = u / d.stride;
                        if (ow >= d.w) continue;
                        acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + oh) * d.w + ow] *
                               w[((static_cast<std::size_t>(ci) * d.cout + co) * d.k + kh) * d.k + kw];
                    }
                }
            }
            y[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + ih) * ow_n + iw] = acc;
        }
    }
}

template <typename T>
void deconv2d_backward_input(const T* gy, const T* w, T* gx, const Deconv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w(), pad = d.pad();
    const long long total = static_cast<long long>(d.n) * d.cin * d.h;
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const int oh = static_cast<int>(idx % d.h);
        const int ci = static_cast<int>((idx / d.h) % d.cin);
        const int n = static_cast<int>(idx / (static_cast<long long>(d.h) * d.cin));
        for (int ow = 0; ow < d.w; ++ow) {
            T acc = T(0);
            for (int co = 0; co < d.cout; ++co) {
                for (int kh = 0; kh < d.k; ++kh) {
                    const int ih = oh * d.stride - pad + kh;
                    if (ih < 0 || ih >= oh_n) continue;
                    for (int kw = 0; kw < d.k; ++kw) {
                        const int iw = ow * d.stride - pad + kw;
                        if (iw < 0 || iw >= ow_n) continue;
                        acc += gy[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + ih) * ow_n + iw] *
                               w[((static_cast<std::size_t>(ci) * d.cout + co) * d.k + kh) * d.k + kw];
                    }
                }
            }
            gx[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + oh) * d.w + ow] += acc;
        }
    }
}

template <typename T>
void deconv2d_backward_weight(const T* gy, const T* x, T* gw, const Deconv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w(), pad = d.pad();
    const long long total = static_cast<long long>(d.cin) * d.cout * d.k * d.k;
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const int kw = static_cast<int>(idx % d.k);
        const int kh = static_cast<int>((idx / d.k) % d.k);
        const int co = static_cast<int>((idx / (static_cast<long long>(d.k) * d.k)) % d.cout);
        const int ci = static_cast<int>(idx / (static_cast<long long>(d.k) * d.k * d.cout));
        T acc = T(0);
        for (int n = 0; n < d.n; ++n) {
            for (int oh = 0; oh < d.h; ++oh) {
                const int ih = oh * d.stride - pad + kh;
                if (ih < 0 || ih >= oh_n) continue;
                for (int ow = 0; ow < d.w; ++ow) {
                    const int iw = ow * d.stride - pad + kw;
                    if (iw < 0 || iw >= ow_n) continue;
                    acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + oh) * d.w + ow] *
                           gy[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + ih) * ow_n + iw];
                }
            }
        }
        gw[((static_cast<std::size_t>(ci) * d.cout + co) * d.k + kh) * d.k + kw] += acc;
    }
}

template <typename T>
void deconv2d_backward_bias(const T* gy, T* gb, const Deconv2dDims& d) {
    const int oh_n = d.out_h(), ow_n = d.out_w();
#pragma omp parallel for schedule(static)
    for (int co = 0; co < d.cout; ++co) {
        T acc = T(0);
        for (int n = 0; n < d.n; ++n)
            for (int ih = 0; ih < oh_n; ++ih)
                for (int iw = 0; iw < ow_n; ++iw)
                    acc += gy[((static_cast<std::size_t>(n) * d.cout + co) * oh_n + ih) * ow_n + iw];
        gb[co] += acc;
    }
}

template <typename T>
void warp_forward(const T* src, const T* flow, T* y, int n, int c, int h, int w) {
    const long long total = static_cast<long long>(n) * c * h;
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const int yy = static_cast<int>(idx % h);
        const int ci = static_cast<int>((idx / h) % c);
        const int ni = static_cast<int>(idx / (static_cast<long long>(h) * c));
        const T* fx = flow + (static_cast<std::size_t>(ni) * 2 + 0) * h * w;
        const T* fy = flow + (static_cast<std::size_t>(ni) * 2 + 1) * h * w;
        const T* plane = src + (static_cast<std::size_t>(ni) * c + ci) * h * w;
        T* out = y + (static_cast<std::size_t>(ni) * c + ci) * h * w;
        for (int xx = 0; xx < w; ++xx) {
            const std::size_t p = static_cast<std::size_t>(yy) * w + xx;
            const T sx = T(xx) + fx[p];
            const T sy = T(yy) + fy[p];
            const T fxf = std::floor(sx);
            const T fyf = std::floor(sy);
            const T ax = sx - fxf;
            const T ay = sy - fyf;
            const int x0 = std::clamp(static_cast<int>(fxf), 0, w - 1);
            const int x1 = std::clamp(static_cast<int>(fxf) + 1, 0, w - 1);
            const int y0 = std::clamp(static_cast<int>(fyf), 0, h - 1);
            const int y1 = std::clamp(static_cast<int>(fyf) + 1, 0, h - 1);
            const T v00 = plane[static_cast<std::size_t>(y0) * w + x0];
            const T v01 = plane[static_cast<std::size_t>(y0) * w + x1];
            const T v10 = plane[static_cast<std::size_t>(y1) * w + x0];
            const T v11 = plane[static_cast<std::size_t>(y1) * w + x1];
            out[p] = (T(1) - ay) * ((T(1) - ax) * v00 + ax * v01) +
                     ay * ((T(1) - ax) * v10 + ax * v11);
        }
    }
}

// Two passes: flow gradients gather per pixel (channel loop inside, same
// order as serial); source gradients scatter within a single (n,c) plane,
// so planes are the parallel unit.
template <typename T>
void warp_backward(const T* src, const T* flow, const T* gy, T* gsrc, T* gflow,
                   int n, int c, int h, int w) {
    if (gflow) {
        const long long rows = static_cast<long long>(n) * h;
#pragma omp parallel for schedule(static)
        for (long long idx = 0; idx < rows; ++idx) {
            const int yy = static_cast<int>(idx % h);
            const int ni = static_cast<int>(idx / h);
            const T* fx = flow + (static_cast<std::size_t>(ni) * 2 + 0) * h * w;
            const T* fy = flow + (static_cast<std::size_t>(ni) * 2 + 1) * h * w;
            T* gfx = gflow + (static_cast<std::size_t>(ni) * 2 + 0) * h * w;
            T* gfy = gflow + (static_cast<std::size_t>(ni) * 2 + 1) * h * w;
            for (int xx = 0; xx < w; ++xx) {
                const std::size_t p = static_cast<std::size_t>(yy) * w + xx;
                T accx = T(0), accy = T(0);
                for (int ci = 0; ci < c; ++ci) {
                    const T go = gy[(static_cast<std::size_t>(ni) * c + ci) * h * w + p];
                    if (go == T(0)) continue;
                    const T* plane = src + (static_cast<std::size_t>(ni) * c + ci) * h * w;
                    const T sx = T(xx) + fx[p];
                    const T sy = T(yy) + fy[p];
                    const T fxf = std::floor(sx);
                    const T fyf = std::floor(sy);
                    const T ax = sx - fxf;
                    const T ay = sy - fyf;
                    const int x0 = std::clamp(static_cast<int>(fxf), 0, w - 1);
                    const int x1 = std::clamp(static_cast<int>(fxf) + 1, 0, w - 1);
                    const int y0 = std::clamp(static_cast<int>(fyf), 0, h - 1);
                    const int y1 = std::clamp(static_cast<int>(fyf) + 1, 0, h - 1);
                    const T v00 = plane[static_cast<std::size_t>(y0) * w + x0];
                    const T v01 = plane[static_cast<std::size_t>(y0) * w + x1];
                    const T v10 = plane[static_cast<std::size_t>(y1) * w + x0];
                    const T v11 = plane[static_cast<std::size_t>(y1) * w + x1];
                    accx += go * ((T(1) - ay) * (v01 - v00) + ay * (v11 - v10));
                    accy += go * ((T(1) - ax) * (v10 - v00) + ax * (v11 - v01));
                }
                gfx[p] += accx;
                gfy[p] += accy;
            }
        }
    }
    if (gsrc) {
        const long long planes = static_cast<long long>(n) * c;
#pragma omp parallel for schedule(static)
        for (long long pl = 0; pl < planes; ++pl) {
            const int ci = static_cast<int>(pl % c);
            const int ni = static_cast<int>(pl / c);
            const T* fx = flow + (static_cast<std::size_t>(ni) * 2 + 0) * h * w;
            const T* fy = flow + (static_cast<std::size_t>(ni) * 2 + 1) * h * w;
            const T* g = gy + (static_cast<std::size_t>(ni) * c + ci) * h * w;
            T* gs = gsrc + (static_cast<std::size_t>(ni) * c + ci) * h * w;
            for (int yy = 0; yy < h; ++yy) {
                for (int xx = 0; xx < w; ++xx) {
                    const std::size_t p = static_cast<std::size_t>(yy) * w + xx;
                    const T go = g[p];
                    if (go == T(0)) continue;
                    const T sx = T(xx) + fx[p];
                    const T sy = T(yy) + fy[p];
                    const T fxf = std::floor(sx);
                    const T fyf = std::floor(sy);
                    const T ax = sx - fxf;
                    const T ay = sy - fyf;
                    const int x0 = std::clamp(static_cast<int>(fxf), 0, w - 1);
                    const int x1 = std::clamp(static_cast<int>(fxf) + 1, 0, w - 1);
                    const int y0 = std::clamp(static_cast<int>(fyf), 0, h - 1);
                    const int y1 = std::clamp(static_cast<int>(fyf) + 1, 0, h - 1);
                    gs[static_cast<std::size_t>(y0) * w + x0] += go * (T(1) - ay) * (T(1) - ax);
                    gs[static_cast<std::size_t>(y0) * w + x1] += go * (T(1) - ay) * ax;
                    gs[static_cast<std::size_t>(y1) * w + x0] += go * ay * (T(1) - ax);
                    gs[static_cast<std::size_t>(y1) * w + x1] += go * ay * ax;
                }
            }
        }
    }
}

template <typename T>
void avg_pool2_forward(const T* x, T* y, int n, int c, int h, int w) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n * c; ++p) {
        const T* in = x + static_cast<std::size_t>(p) * h * w;
        T* out = y + static_cast<std::size_t>(p) * oh * ow;
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j)
                out[static_cast<std::size_t>(i) * ow + j] =
                    (in[static_cast<std::size_t>(2 * i) * w + 2 * j] +
                     in[static_cast<std::size_t>(2 * i) * w + 2 * j + 1] +
                     in[static_cast<std::size_t>(2 * i + 1) * w + 2 * j] +
                     in[static_cast<std::size_t>(2 * i + 1) * w + 2 * j + 1]) * T(0.25);
    }
}

template <typename T>
void avg_pool2_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n * c; ++p) {
        const T* g = gy + static_cast<std::size_t>(p) * oh * ow;
        T* out = gx + static_cast<std::size_t>(p) * h * w;
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                const T v = g[static_cast<std::size_t>(i) * ow + j] * T(0.25);
                out[static_cast<std::size_t>(2 * i) * w + 2 * j] += v;
                out[static_cast<std::size_t>(2 * i) * w + 2 * j + 1] += v;
                out[static_cast<std::size_t>(2 * i + 1) * w + 2 * j] += v;
                out[static_cast<std::size_t>(2 * i + 1) * w + 2 * j + 1] += v;
            }
    }
}

template <typename T>
void global_avg_pool_forward(const T* x, T* y, int n, int c, int h, int w) {
    const T inv = T(1) / (T(h) * T(w));
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n * c; ++p) {
        const T* in = x + static_cast<std::size_t>(p) * h * w;
        T acc = T(0);
        for (int i = 0; i < h * w; ++i) acc += in[i];
        y[p] = acc * inv;
    }
}

template <typename T>
void global_avg_pool_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    const T inv = T(1) / (T(h) * T(w));
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n * c; ++p) {
        const T v = gy[p] * inv;
        T* out = gx + static_cast<std::size_t>(p) * h * w;
        for (int i = 0; i < h * w; ++i) out[i] += v;
    }
}

template <typename T>
void upsample_nearest2_forward(const T* x, T* y, int n, int c, int h, int w) {
    const int oh = h * 2, ow = w * 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n * c; ++p) {
        const T* in = x + static_cast<std::size_t>(p) * h * w;
        T* out = y + static_cast<std::size_t>(p) * oh * ow;
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j)
                out[static_cast<std::size_t>(i) * ow + j] =
                    in[static_cast<std::size_t>(i / 2) * w + j / 2];
    }
}

template <typename T>
void upsample_nearest2_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    const int ow = w * 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n * c; ++p) {
        const T* g = gy + static_cast<std::size_t>(p) * (h * 2) * ow;
        T* out = gx + static_cast<std::size_t>(p) * h * w;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                out[static_cast<std::size_t>(i) * w + j] +=
                    g[static_cast<std::size_t>(2 * i) * ow + 2 * j] +
                    g[static_cast<std::size_t>(2 * i) * ow + 2 * j + 1] +
                    g[static_cast<std::size_t>(2 * i + 1) * ow + 2 * j] +
                    g[static_cast<std::size_t>(2 * i + 1) * ow + 2 * j + 1];
    }
}

#define EEV_INSTANTIATE_OMP(T) \
    template void conv2d_forward<T>(const T*, const T*, const T*, T*, const Conv2dDims&); \
    template void conv2d_backward_input<T>(const T*, const T*, T*, const Conv2dDims&); \
    template void conv2d_backward_weight<T>(const T*, const T*, T*, const Conv2dDims&); \
    template void conv2d_backward_bias<T>(const T*, T*, const Conv2dDims&); \
    template void deconv2d_forward<T>(const T*, const T*, const T*, T*, const Deconv2dDims&); \
    template void deconv2d_backward_input<T>(const T*, const T*, T*, const Deconv2dDims&); \
    template void deconv2d_backward_weight<T>(const T*, const T*, T*, const Deconv2dDims&); \
    template void deconv2d_backward_bias<T>(const T*, T*, const Deconv2dDims&); \
    template void warp_forward<T>(const T*, const T*, T*, int, int, int, int); \
    template void warp_backward<T>(const T*, const T*, const T*, T*, T*, int, int, int, int); \
    template void avg_pool2_forward<T>(const T*, T*, int, int, int, int); \
    template void avg_pool2_backward<T>(const T*, T*, int, int, int, int); \
    template void global_avg_pool_forward<T>(const T*, T*, int, int, int, int); \
    template void global_avg_pool_backward<T>(const T*, T*, int, int, int, int); \
    template void upsample_nearest2_forward<T>(const T*, T*, int, int, int, int); \
    template void upsample_nearest2_backward<T>(const T*, T*, int, int, int, int);

EEV_INSTANTIATE_OMP(float)
EEV_INSTANTIATE_OMP(double)

} // namespace eev::kernels::omp
