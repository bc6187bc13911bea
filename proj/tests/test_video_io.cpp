#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "eev/png_io.hpp"
#include "eev/video_io.hpp"

using namespace eev;
using namespace eev::bench;

namespace {

Image8 gradient_image(int w, int h, int seed = 0) {
    Image8 img;
    img.width = w;
    img.height = h;
    img.rgb.resize(img.pixel_count() * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<std::uint8_t>((x * 3 + y * 5 + c * 31 + seed) % 256);
    return img;
}

} // namespace

TEST_CASE("center_crop64 crops 100x70 to 64x64 at offsets (18,3)") {
    auto img = gradient_image(100, 70);
    auto cropped = center_crop64(img);
    CHECK(cropped.width == 64);
    CHECK(cropped.height == 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(cropped.at(x, y, c) == img.at(x + 18, y + 3, c));
}

TEST_CASE("center_crop64 leaves multiples of 64 untouched") {
    auto img = gradient_image(128, 64);
    auto cropped = center_crop64(img);
    CHECK(cropped.width == 128);
    CHECK(cropped.height == 64);
    CHECK(cropped.rgb == img.rgb);
}

TEST_CASE("center_crop64 rejects frames under 64 pixels") {
    CHECK_THROWS_AS(center_crop64(gradient_image(63, 100)), IoError);
}

TEST_CASE("raw rgb24 loading round-trips and counts bytes") {
    const std::string path = "/tmp/eev_test_video.rgb";
    std::vector<Image8> frames = {gradient_image(96, 80, 1), gradient_image(96, 80, 2)};
    write_video_raw_rgb24(path, frames);

    auto clip = load_video(path, VideoFormat::raw_rgb24, 96, 80, 2);
    CHECK(clip.width == 64);
    CHECK(clip.height == 64);
    REQUIRE(clip.frames.size() == 2);
    CHECK(clip.frames[0].rgb == center_crop64(frames[0]).rgb);
    CHECK(clip.frames[1].rgb == center_crop64(frames[1]).rgb);

    try {
        load_video(path, VideoFormat::raw_rgb24, 96, 80, 3);
        FAIL("short file not detected");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("expected") != std::string::npos);
        CHECK(msg.find("ends after") != std::string::npos);
    }
}

TEST_CASE("load_video rejects declared dims below 64") {
    CHECK_THROWS_AS(load_video("/tmp/absent.rgb", VideoFormat::raw_rgb24, 48, 48, 1), IoError);
}

TEST_CASE("yuv420 conversion uses the BT.601 full-range matrix") {
    // neutral gray: chroma at 128 leaves luma untouched
    const int w = 64, h = 64;
    std::vector<std::uint8_t> y(static_cast<std::size_t>(w) * h, 128);
    std::vector<std::uint8_t> u(static_cast<std::size_t>(w) * h / 4, 128);
    std::vector<std::uint8_t> v(u);
    auto rgb = yuv420_to_rgb(y.data(), u.data(), v.data(), w, h);
    for (auto b : rgb.rgb) CHECK(static_cast<int>(b) == 128);

    // red chroma offset of +50: R = Y + 1.402 (Cr-128)
    std::fill(v.begin(), v.end(), 178);
    auto red = yuv420_to_rgb(y.data(), u.data(), v.data(), w, h);
    CHECK(static_cast<int>(red.at(0, 0, 0)) == 128 + std::lround(1.402 * 50));
    CHECK(static_cast<int>(red.at(0, 0, 2)) == 128); // Cb unchanged
}

TEST_CASE("yuv420 files load and crop") {
    const std::string path = "/tmp/eev_test_video.yuv";
    const int w = 96, h = 80;
    {
        std::ofstream out(path, std::ios::binary);
        std::vector<char> yplane(static_cast<std::size_t>(w) * h, 90);
        std::vector<char> cplane(static_cast<std::size_t>(w) * h / 4, static_cast<char>(128));
        for (int f = 0; f < 2; ++f) {
            out.write(yplane.data(), static_cast<std::streamsize>(yplane.size()));
            out.write(cplane.data(), static_cast<std::streamsize>(cplane.size()));
            out.write(cplane.data(), static_cast<std::streamsize>(cplane.size()));
        }
    }
    auto clip = load_video(path, VideoFormat::yuv420_8bit, w, h, 2);
    CHECK(clip.width == 64);
    CHECK(clip.height == 64);
    for (auto b : clip.frames[0].rgb) CHECK(static_cast<int>(b) == 90);
}

TEST_CASE("image sequences load in name order") {
    const std::string dir = "/tmp/eev_test_seq";
    std::filesystem::create_directories(dir);
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        std::filesystem::remove(entry.path());
    png::write_ppm_file(dir + "/frame_000.ppm", gradient_image(64, 64, 0));
    png::write_png_file(dir + "/frame_001.png", gradient_image(64, 64, 7));

    auto clip = load_video(dir, VideoFormat::image_sequence, 0, 0, 2);
    REQUIRE(clip.frames.size() == 2);
    CHECK(clip.frames[0].rgb == gradient_image(64, 64, 0).rgb);
    CHECK(clip.frames[1].rgb == gradient_image(64, 64, 7).rgb);

    CHECK_THROWS_AS(load_video(dir, VideoFormat::image_sequence, 0, 0, 3), IoError);
}

TEST_CASE("png round-trips through our writer and reader") {
    auto img = gradient_image(97, 61); // odd dims exercise the stored-block path
    auto bytes = png::encode_png(img);
    auto back = png::decode_png(bytes);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.rgb == img.rgb);
}

TEST_CASE("png reader inflates dynamic-Huffman streams from other writers") {
    // 32x8 RGB PNG with a dynamic-Huffman deflate stream and sub/up row
    // filters, produced by an independent zlib-based encoder; pixel (x,y,c)
    // holds (x*x + 7y + 13c) mod 97
    static const unsigned char png_bytes[] = {
        0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
        0x44, 0x52, 0x00, 0x00, 0x00, 0x20, 0x00, 0x00, 0x00, 0x08, 0x08, 0x02, 0x00, 0x00,
        0x00, 0x17, 0xe7, 0x6a, 0xf8, 0x00, 0x00, 0x01, 0x97, 0x49, 0x44, 0x41, 0x54, 0x78,
        0xda, 0x8d, 0xd2, 0x6b, 0x4b, 0x83, 0x60, 0x14, 0x07, 0xf0, 0x9e, 0xad, 0x61, 0x9b,
        0x99, 0xc9, 0x32, 0x33, 0x33, 0x31, 0xb3, 0xb5, 0xd6, 0x32, 0x37, 0x64, 0x89, 0x6d,
        0x5d, 0xa0, 0x28, 0xba, 0x11, 0x11, 0x8c, 0x06, 0xd5, 0xa7, 0x1b, 0x11, 0x31, 0x22,
        0x62, 0xc8, 0x08, 0x91, 0x90, 0x21, 0x32, 0x64, 0x88, 0x88, 0x0c, 0x3f, 0x4c, 0x6e,
        0x45, 0xb1, 0xd6, 0x65, 0xe7, 0xcd, 0x39, 0x6f, 0x0e, 0x9c, 0x1f, 0xe7, 0x1f, 0x19,
        0x41, 0x66, 0xc1, 0x04, 0x35, 0x8a, 0xcd, 0xc7, 0xa7, 0xb9, 0x49, 0x7a, 0x85, 0x5c,
        0xca, 0x2f, 0x8a, 0x25, 0xb1, 0x74, 0xb4, 0x7d, 0x72, 0x75, 0x7e, 0x9d, 0x88, 0x4e,
        0xd2, 0x33, 0x7c, 0x4e, 0xd8, 0x3c, 0x3c, 0xb8, 0x04, 0x11, 0x74, 0x8e, 0x59, 0x95,
        0x4b, 0x47, 0xe5, 0x1b, 0x78, 0x86, 0x5d, 0x53, 0xf6, 0x2f, 0x6e, 0xc7, 0xc9, 0x25,
        0x69, 0xf7, 0x2c, 0x6c, 0xab, 0xf2, 0x7e, 0x05, 0x9a, 0xca, 0x6c, 0xec, 0x5d, 0x27,
        0x88, 0xdc, 0xd6, 0xf1, 0x18, 0xbe, 0xb0, 0x73, 0x5a, 0xa1, 0x96, 0xa5, 0xf2, 0x28,
        0x06, 0xa0, 0x29, 0x16, 0x00, 0x10, 0x8d, 0x46, 0x63, 0xb1, 0x18, 0x04, 0x41, 0xf1,
        0x78, 0x1c, 0x86, 0x61, 0x04, 0x41, 0x50, 0xb4, 0x86, 0x3d, 0x62, 0x4f, 0xc9, 0x24,
        0x8e, 0xe3, 0x04, 0x41, 0x90, 0xa4, 0xda, 0x68, 0x50, 0x34, 0x4d, 0x33, 0x0c, 0xa3,
        0xeb, 0x3a, 0xc7, 0x71, 0x3c, 0x6f, 0x34, 0x9b, 0xa9, 0x74, 0x3a, 0x6d, 0x59, 0x56,
        0x36, 0x9b, 0xb5, 0x6d, 0x5b, 0x14, 0x45, 0xc7, 0x71, 0x24, 0x49, 0xf2, 0x3c, 0x4f,
        0x96, 0xfd, 0x4e, 0x47, 0x29, 0x06, 0x41, 0x04, 0x1a, 0xb2, 0xaa, 0x03, 0x53, 0x75,
        0xa8, 0x25, 0x80, 0x2f, 0x08, 0x3f, 0x0b, 0x6a, 0xb5, 0x47, 0x0c, 0x4b, 0x7e, 0x0a,
        0x54, 0xb5, 0x41, 0xbd, 0x0b, 0x34, 0x5d, 0x67, 0xbb, 0x02, 0xc3, 0x68, 0xa6, 0x42,
        0x81, 0x69, 0x59, 0x99, 0x7e, 0x81, 0xeb, 0x79, 0x05, 0xd9, 0xf7, 0x3b, 0x8a, 0x12,
        0xfc, 0x2e, 0xf8, 0x76, 0x5e, 0xf5, 0x3f, 0x40, 0xf5, 0x37, 0x14, 0xe0, 0xd6, 0x8b,
        0x03, 0x82, 0x7b, 0xe4, 0x01, 0xa9, 0xa1, 0x28, 0xf6, 0x25, 0xa8, 0xab, 0x2a, 0x49,
        0xf5, 0x04, 0x9a, 0xa6, 0xb1, 0x6c, 0x57, 0x60, 0x18, 0x46, 0x2a, 0x14, 0x98, 0xa6,
        0x95, 0x09, 0x05, 0x2d, 0xdb, 0x16, 0x44, 0xb1, 0xed, 0x38, 0x79, 0xc9, 0x75, 0xbd,
        0x42, 0xc1, 0xf7, 0x7d, 0xe5, 0x4f, 0xc1, 0x7f, 0x0f, 0x18, 0x16, 0x00, 0x81, 0x30,
        0x91, 0xfd, 0x82, 0x3b, 0xf8, 0x1e, 0x7e, 0xe8, 0xa6, 0xe8, 0x53, 0xf0, 0x4c, 0xd4,
        0x09, 0x95, 0x7c, 0x17, 0xbc, 0x68, 0x1a, 0xd3, 0x13, 0xbc, 0x1a, 0x06, 0x1f, 0x0a,
        0x4c, 0xd3, 0xcc, 0x84, 0x82, 0x56, 0xcb, 0x16, 0x04, 0xb1, 0xdd, 0x76, 0xf2, 0x79,
        0xd7, 0x75, 0x0b, 0x1f, 0x82, 0x4e, 0x10, 0x14, 0xdf, 0x00, 0x5c, 0x46, 0x9b, 0x6b,
        0x41, 0x6d, 0x2a, 0xdb, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42,
        0x60, 0x82,
    };
    std::vector<std::uint8_t> bytes(png_bytes, png_bytes + sizeof(png_bytes));
    auto img = png::decode_png(bytes);
    CHECK(img.width == 32);
    CHECK(img.height == 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(static_cast<int>(img.at(x, y, c)) == (x * x + y * 7 + c * 13) % 97);
}
