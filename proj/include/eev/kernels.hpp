#pragma once

// Dense NCHW kernels. Every kernel exists twice: a plain serial reference
// (kernels_serial.cpp) and an OpenMP version parallelized over independent
// output slices (kernels_omp.cpp). Per output element the summation order is
// identical in both, so the two backends produce bit-identical results; the
// unit tests and eev-kernel-bench compare them.
//
// Forward kernels overwrite their output buffer. Backward kernels accumulate
// (+=) into the gradient buffers.

namespace eev::kernels {

enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);
bool openmp_available();
int thread_count();
// Applies EEV_THREADS (if set) to the OpenMP runtime. Called once lazily.
void init_threads_from_env();

struct Conv2dDims {
    int n, cin, h, w;
    int cout, k, stride, pad;
    int out_h() const { return (h + 2 * pad - k) / stride + 1; }
    int out_w() const { return (w + 2 * pad - k) / stride + 1; }
};

// Deconvolution weights are stored [Cin, Cout, k, k]; output is exactly
// stride*h x stride*w, which makes deconv2d the adjoint of conv2d with the
// same weight buffer (pad = (k-1)/2 on both sides).
struct Deconv2dDims {
    int n, cin, h, w;
    int cout, k, stride;
    int pad() const { return (k - 1) / 2; }
    int out_h() const { return stride * h; }
    int out_w() const { return stride * w; }
};

namespace serial {

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const Conv2dDims& d);
template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const Conv2dDims& d);
template <typename T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw, const Conv2dDims& d);
template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const Conv2dDims& d);

template <typename T>
void deconv2d_forward(const T* x, const T* w, const T* b, T* y, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_input(const T* gy, const T* w, T* gx, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_weight(const T* gy, const T* x, T* gw, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_bias(const T* gy, T* gb, const Deconv2dDims& d);

template <typename T>
void warp_forward(const T* src, const T* flow, T* y, int n, int c, int h, int w);
template <typename T>
void warp_backward(const T* src, const T* flow, const T* gy, T* gsrc, T* gflow,
                   int n, int c, int h, int w);

template <typename T>
void avg_pool2_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void avg_pool2_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void global_avg_pool_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void global_avg_pool_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void upsample_nearest2_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void upsample_nearest2_backward(const T* gy, T* gx, int n, int c, int h, int w);

} // namespace serial

namespace omp {

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const Conv2dDims& d);
template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const Conv2dDims& d);
template <typename T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw, const Conv2dDims& d);
template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const Conv2dDims& d);

template <typename T>
void deconv2d_forward(const T* x, const T* w, const T* b, T* y, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_input(const T* gy, const T* w, T* gx, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_weight(const T* gy, const T* x, T* gw, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_bias(const T* gy, T* gb, const Deconv2dDims& d);

template <typename T>
void warp_forward(const T* src, const T* flow, T* y, int n, int c, int h, int w);
template <typename T>
void warp_backward(const T* src, const T* flow, const T* gy, T* gsrc, T* gflow,
                   int n, int c, int h, int w);

template <typename T>
void avg_pool2_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void avg_pool2_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void global_avg_pool_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void global_avg_pool_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void upsample_nearest2_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void upsample_nearest2_backward(const T* gy, T* gx, int n, int c, int h, int w);

} // namespace omp

// Dispatching entry points used by the tensor operators.
template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const Conv2dDims& d);
template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const Conv2dDims& d);
template <typename T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw, const Conv2dDims& d);
template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const Conv2dDims& d);

template <typename T>
void deconv2d_forward(const T* x, const T* w, const T* b, T* y, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_input(const T* gy, const T* w, T* gx, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_weight(const T* gy, const T* x, T* gw, const Deconv2dDims& d);
template <typename T>
void deconv2d_backward_bias(const T* gy, T* gb, const Deconv2dDims& d);

template <typename T>
void warp_forward(const T* src, const T* flow, T* y, int n, int c, int h, int w);
template <typename T>
void warp_backward(const T* src, const T* flow, const T* gy, T* gsrc, T* gflow,
                   int n, int c, int h, int w);

template <typename T>
void avg_pool2_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void avg_pool2_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void global_avg_pool_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void global_avg_pool_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void upsample_nearest2_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void upsample_nearest2_backward(const T* gy, T* gx, int n, int c, int h, int w);

} // namespace eev::kernels
