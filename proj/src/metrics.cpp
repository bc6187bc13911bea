#include "eev/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace eev::bench {

double psnr_rgb(const Image8& a, const Image8& b) {
    if (a.width != b.width || a.height != b.height)
        throw Error("psnr_rgb: image dimensions differ");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(a.rgb.size());
    if (mse <= 0.0) return 100.0;
    return std::min(10.0 * std::log10(255.0 * 255.0 / mse), 100.0);
}

namespace {

struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane channel_plane(const Image8& img, int c) {
    Plane p;
    p.w = img.width;
    p.h = img.height;
    p.v.resize(img.pixel_count());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            p.v[static_cast<std::size_t>(y) * p.w + x] = img.at(x, y, c);
    return p;
}

Plane luma_plane(const Image8& img) {
    Plane p;
    p.w = img.width;
    p.h = img.height;
    p.v.resize(img.pixel_count());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            p.v[static_cast<std::size_t>(y) * p.w + x] =
                0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    return p;
}

constexpr int kWin = 11;

const std::vector<double>& gaussian_taps() {
    static const std::vector<double> taps = [] {
        std::vector<double> t(kWin);
        double total = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2;
            t[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            total += t[static_cast<std::size_t>(i)];
        }
        for (auto& v : t) v /= total;
        return t;
    }();
    return taps;
}

// separable Gaussian over the fully covered region only
Plane blur_valid(const Plane& in) {
    const auto& taps = gaussian_taps();
    Plane mid;
    mid.w = in.w - (kWin - 1);
    mid.h = in.h;
    mid.v.resize(static_cast<std::size_t>(mid.w) * mid.h);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < mid.w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += taps[static_cast<std::size_t>(k)] * in.at(x + k, y);
            mid.v[static_cast<std::size_t>(y) * mid.w + x] = acc;
        }
    Plane out;
    out.w = mid.w;
    out.h = in.h - (kWin - 1);
    out.v.resize(static_cast<std::size_t>(out.w) * out.h);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += taps[static_cast<std::size_t>(k)] * mid.at(x, y + k);
            out.v[static_cast<std::size_t>(y) * out.w + x] = acc;
        }
    return out;
}

Plane multiply(const Plane& a, const Plane& b) {
    Plane out = a;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

Plane downsample2(const Plane& in) {
    Plane out;
    out.w = in.w / 2;
    out.h = in.h / 2;
    out.v.resize(static_cast<std::size_t>(out.w) * out.h);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.v[static_cast<std::size_t>(y) * out.w + x] =
                0.25 * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) +
                        in.at(2 * x + 1, 2 * y + 1));
    return out;
}

struct ScaleStats {
    double luminance = 0.0; // mean of l map
    double contrast = 0.0;  // mean of cs map
};

ScaleStats ssim_stats(const Plane& a, const Plane& b) {
    constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    const Plane mu_a = blur_valid(a);
    const Plane mu_b = blur_valid(b);
    const Plane aa = blur_valid(multiply(a, a));
    const Plane bb = blur_valid(multiply(b, b));
    const Plane ab = blur_valid(multiply(a, b));

    double l_sum = 0.0, cs_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double va = aa.v[i] - ma * ma;
        const double vb = bb.v[i] - mb * mb;
        const double cov = ab.v[i] - ma * mb;
        l_sum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_sum += (2.0 * cov + c2) / (va + vb + c2);
    }
    const double n = static_cast<double>(mu_a.v.size());
    return {l_sum / n, cs_sum / n};
}

const double kScaleWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

double msssim_plane(Plane a, Plane b) {
    int scales = ms_ssim_scales(a.w, a.h);
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += kScaleWeights[s];

    double score = 1.0;
    for (int s = 0; s < scales; ++s) {
        const ScaleStats stats = ssim_stats(a, b);
        const double expo = kScaleWeights[s] / wsum;
        if (s + 1 == scales) {
            score *= std::pow(std::max(stats.luminance * stats.contrast, 0.0), expo);
        } else {
            score *= std::pow(std::max(stats.contrast, 0.0), expo);
            a = downsample2(a);
            b = downsample2(b);
        }
    }
    return score;
}

} // namespace

int ms_ssim_scales(int width, int height) {
    int scales = 1;
    int w = width, h = height;
    while (scales < 5) {
        w /= 2;
        h /= 2;
        if (std::min(w, h) < kWin) break;
        ++scales;
    }
    return scales;
}

double ms_ssim(const Image8& a, const Image8& b, MsssimMode mode) {
    if (a.width != b.width || a.height != b.height)
        throw Error("ms_ssim: image dimensions differ");
    if (std::min(a.width, a.height) < kWin)
        throw Error("ms_ssim: images must be at least 11x11");
    if (mode == MsssimMode::luma) return msssim_plane(luma_plane(a), luma_plane(b));
    double total = 0.0;
    for (int c = 0; c < 3; ++c)
        total += msssim_plane(channel_plane(a, c), channel_plane(b, c));
    return total / 3.0;
}

} // namespace eev::bench
