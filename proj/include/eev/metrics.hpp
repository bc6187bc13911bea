#pragma once

#include "eev/image.hpp"

namespace eev::bench {

// 10*log10(255^2 / MSE) over all RGB samples jointly; identical images are
// reported as 100 dB.
double psnr_rgb(const Image8& a, const Image8& b);

enum class MsssimMode {
    rgb_average, // mean of the per-channel scores (default)
    luma,        // BT.601 luma plane only
};

// Multi-scale SSIM: 11x11 Gaussian window (sigma 1.5), weights
// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333), 2x2 mean-pool between scales,
// statistics over the valid (fully covered) window region. Images smaller
// than 176 px use fewer scales with renormalized weights.
double ms_ssim(const Image8& a, const Image8& b, MsssimMode mode = MsssimMode::rgb_average);

// number of scales usable at a given size (1..5)
int ms_ssim_scales(int width, int height);

} // namespace eev::bench
