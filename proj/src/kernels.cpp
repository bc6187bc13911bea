#include "eev/kernels.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eev::kernels {

namespace {

std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::openmp
#else
    Backend::serial
#endif
};

std::atomic<bool> g_env_applied{false};

} // namespace

bool openmp_available() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

void init_threads_from_env() {
    if (g_env_applied.exchange(true)) return;
#ifdef _OPENMP
    if (const char* env = std::getenv("EEV_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) omp_set_num_threads(t);
    }
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

Backend backend() {
    init_threads_from_env();
    return g_backend.load();
}

void set_backend(Backend b) {
    g_backend.store(b);
}

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const Conv2dDims& d) {
    if (backend() == Backend::openmp) omp::conv2d_forward(x, w, b, y, d);
    else serial::conv2d_forward(x, w, b, y, d);
}
template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const Conv2dDims& d) {
    if (backend() == Backend::openmp) omp::conv2d_backward_input(gy, w, gx, d);
    else serial::conv2d_backward_input(gy, w, gx, d);
}
template <typename T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw, const Conv2dDims& d) {
    if (backend() == Backend::openmp) omp::conv2d_backward_weight(gy, x, gw, d);
    else serial::conv2d_backward_weight(gy, x, gw, d);
}
template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const Conv2dDims& d) {
    if (backend() == Backend::openmp) omp::conv2d_backward_bias(gy, gb, d);
    else serial::conv2d_backward_bias(gy, gb, d);
}

template <typename T>
void deconv2d_forward(const T* x, const T* w, const T* b, T* y, const Deconv2dDims& d) {
    if (backend() == Backend::openmp) omp::deconv2d_forward(x, w, b, y, d);
    else serial::deconv2d_forward(x, w, b, y, d);
}
template <typename T>
void deconv2d_backward_input(const T* gy, const T* w, T* gx, const Deconv2dDims& d) {
    if (backend() == Backend::openmp) omp::deconv2d_backward_input(gy, w, gx, d);
    else serial::deconv2d_backward_input(gy, w, gx, d);
}
template <typename T>
void deconv2d_backward_weight(const T* gy, const T* x, T* gw, const Deconv2dDims& d) {
    if (backend() == Backend::openmp) omp::deconv2d_backward_weight(gy, x, gw, d);
    else serial::deconv2d_backward_weight(gy, x, gw, d);
}
template <typename T>
void deconv2d_backward_bias(const T* gy, T* gb, const Deconv2dDims& d) {
    if (backend() == Backend::openmp) omp::deconv2d_backward_bias(gy, gb, d);
    else serial::deconv2d_backward_bias(gy, gb, d);
}

template <typename T>
void warp_forward(const T* src, const T* flow, T* y, int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::warp_forward(src, flow, y, n, c, h, w);
    else serial::warp_forward(src, flow, y, n, c, h, w);
}
template <typename T>
void warp_backward(const T* src, const T* flow, const T* gy, T* gsrc, T* gflow,
                   int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::warp_backward(src, flow, gy, gsrc, gflow, n, c, h, w);
    else serial::warp_backward(src, flow, gy, gsrc, gflow, n, c, h, w);
}

template <typename T>
void avg_pool2_forward(const T* x, T* y, int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::avg_pool2_forward(x, y, n, c, h, w);
    else serial::avg_pool2_forward(x, y, n, c, h, w);
}
template <typename T>
void avg_pool2_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::avg_pool2_backward(gy, gx, n, c, h, w);
    else serial::avg_pool2_backward(gy, gx, n, c, h, w);
}

template <typename T>
void global_avg_pool_forward(const T* x, T* y, int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::global_avg_pool_forward(x, y, n, c, h, w);
    else serial::global_avg_pool_forward(x, y, n, c, h, w);
}
template <typename T>
void global_avg_pool_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::global_avg_pool_backward(gy, gx, n, c, h, w);
    else serial::global_avg_pool_backward(gy, gx, n, c, h, w);
}

template <typename T>
void upsample_nearest2_forward(const T* x, T* y, int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::upsample_nearest2_forward(x, y, n, c, h, w);
    else serial::upsample_nearest2_forward(x, y, n, c, h, w);
}
template <typename T>
void upsample_nearest2_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    if (backend() == Backend::openmp) omp::upsample_nearest2_backward(gy, gx, n, c, h, w);
    else serial::upsample_nearest2_backward(gy, gx, n, c, h, w);
}

#define EEV_INSTANTIATE_DISPATCH(T) \
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

EEV_INSTANTIATE_DISPATCH(float)
EEV_INSTANTIATE_DISPATCH(double)

} // namespace eev::kernels
