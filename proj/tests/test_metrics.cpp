#include "doctest.h"

#include <cmath>

#include "eev/metrics.hpp"
#include "msssim_reference.hpp"

using namespace eev;
using namespace eev::bench;

namespace {

// smooth band-limited pattern with texture, used as the natural-statistics
// stand-in
Image8 natural_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    struct Wave {
        double amp, fx, fy, phase;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < 6; ++i)
        waves.push_back({20.0 + 25.0 * rng.uniform(),
                         (0.3 + 3.0 * rng.uniform()) * 2.0 * 3.14159265 / 48.0,
                         (0.3 + 3.0 * rng.uniform()) * 2.0 * 3.14159265 / 48.0,
                         6.28 * rng.uniform()});
    Image8 img;
    img.width = w;
    img.height = h;
    img.rgb.resize(img.pixel_count() * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = 128.0 + 10.0 * c;
                for (const auto& wave : waves)
                    v += wave.amp * std::sin(wave.fx * x + wave.fy * y + wave.phase + 0.7 * c);
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
    return img;
}

Image8 add_noise(const Image8& img, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    Image8 out = img;
    for (auto& v : out.rgb)
        v = static_cast<std::uint8_t>(
            std::clamp(static_cast<double>(v) + sigma * rng.normal(), 0.0, 255.0));
    return out;
}

} // namespace

TEST_CASE("psnr closed forms") {
    auto img = natural_image(64, 64, 1);
    CHECK(psnr_rgb(img, img) == 100.0);

    Image8 off16 = img;
    for (auto& v : off16.rgb) v = static_cast<std::uint8_t>(std::min(239, static_cast<int>(v)) + 16);
    Image8 base = img;
    for (auto& v : base.rgb) v = static_cast<std::uint8_t>(std::min(239, static_cast<int>(v)));
    CHECK(psnr_rgb(base, off16) == doctest::Approx(24.048).epsilon(1e-4));

    Image8 black, white;
    black.width = white.width = 32;
    black.height = white.height = 32;
    black.rgb.assign(32 * 32 * 3, 0);
    white.rgb.assign(32 * 32 * 3, 255);
    CHECK(psnr_rgb(black, white) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("psnr is symmetric") {
    auto a = natural_image(64, 64, 2);
    auto b = add_noise(a, 5.0, 3);
    CHECK(psnr_rgb(a, b) == doctest::Approx(psnr_rgb(b, a)));
}

TEST_CASE("ms_ssim of identical images is 1") {
    auto img = natural_image(192, 192, 4);
    CHECK(ms_ssim(img, img) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ms_ssim(img, img, MsssimMode::luma) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ms_ssim scale count follows the 176-pixel rule") {
    CHECK(ms_ssim_scales(176, 176) == 5);
    CHECK(ms_ssim_scales(2688, 1472) == 5);
    CHECK(ms_ssim_scales(64, 64) == 3);
    CHECK(ms_ssim_scales(175, 400) == 4);
}

TEST_CASE("ms_ssim of an inverted image collapses") {
    auto img = natural_image(192, 192, 5);
    Image8 inverted = img;
    for (auto& v : inverted.rgb) v = static_cast<std::uint8_t>(255 - v);
    CHECK(ms_ssim(img, inverted) < 0.3);
}

TEST_CASE("ms_ssim degrades monotonically with noise") {
    auto img = natural_image(192, 192, 6);
    const double s1 = ms_ssim(img, add_noise(img, 2.0, 7));
    const double s2 = ms_ssim(img, add_noise(img, 8.0, 7));
    const double s3 = ms_ssim(img, add_noise(img, 24.0, 7));
    CHECK(s1 > s2);
    CHECK(s2 > s3);
    CHECK(s1 < 1.0);
    CHECK(s3 > 0.0);
}

TEST_CASE("ms_ssim agrees with an independent direct implementation on 10 pairs") {
    for (int pair = 0; pair < 10; ++pair) {
        auto a = natural_image(192, 160, 100 + pair);
        auto b = pair % 3 == 0 ? add_noise(a, 3.0 + pair, 200 + pair)
                               : natural_image(192, 160, 300 + pair);
        const double ours = ms_ssim(a, b, MsssimMode::luma);
        const double reference = testutil::ref_msssim_luma(a, b);
        CHECK(std::abs(ours - reference) < 1e-4);
    }
}
