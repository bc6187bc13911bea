#include "eev/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "eev/png_io.hpp"

namespace eev::bench {

VideoFormat format_from_name(const std::string& name) {
    if (name == "raw-rgb24" || name == "rgb24") return VideoFormat::raw_rgb24;
    if (name == "yuv420-8bit" || name == "yuv420") return VideoFormat::yuv420_8bit;
    if (name == "image-sequence" || name == "images") return VideoFormat::image_sequence;
    throw ParseError("unknown video format \"" + name +
                     "\" (expected raw-rgb24, yuv420-8bit, or image-sequence)");
}

const char* format_name(VideoFormat f) {
    switch (f) {
    case VideoFormat::raw_rgb24: return "raw-rgb24";
    case VideoFormat::yuv420_8bit: return "yuv420-8bit";
    case VideoFormat::image_sequence: return "image-sequence";
    }
    return "?";
}

Image8 center_crop64(const Image8& image) {
    const int cw = (image.width / 64) * 64;
    const int ch = (image.height / 64) * 64;
    if (cw == 0 || ch == 0)
        throw IoError("frame " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                      " is smaller than 64x64");
    if (cw == image.width && ch == image.height) return image;
    const int ox = (image.width - cw) / 2;
    const int oy = (image.height - ch) / 2;
    Image8 out;
    out.width = cw;
    out.height = ch;
    out.rgb.resize(out.pixel_count() * 3);
    for (int y = 0; y < ch; ++y)
        std::copy_n(image.rgb.begin() + ((static_cast<std::size_t>(y) + oy) * image.width + ox) * 3,
                    static_cast<std::size_t>(cw) * 3,
                    out.rgb.begin() + static_cast<std::size_t>(y) * cw * 3);
    return out;
}

Image8 yuv420_to_rgb(const std::uint8_t* y, const std::uint8_t* u, const std::uint8_t* v,
                     int width, int height) {
    Image8 out;
    out.width = width;
    out.height = height;
    out.rgb.resize(out.pixel_count() * 3);
    const int cw = width / 2;
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            const double Y = y[static_cast<std::size_t>(row) * width + col];
            const std::size_t ci = static_cast<std::size_t>(row / 2) * cw + col / 2;
            const double cb = static_cast<double>(u[ci]) - 128.0;
            const double cr = static_cast<double>(v[ci]) - 128.0;
            const double r = Y + 1.402 * cr;
            const double g = Y - 0.344136 * cb - 0.714136 * cr;
            const double b = Y + 1.772 * cb;
            out.at(col, row, 0) = static_cast<std::uint8_t>(std::clamp(std::lround(r), 0l, 255l));
            out.at(col, row, 1) = static_cast<std::uint8_t>(std::clamp(std::lround(g), 0l, 255l));
            out.at(col, row, 2) = static_cast<std::uint8_t>(std::clamp(std::lround(b), 0l, 255l));
        }
    }
    return out;
}

namespace {

std::vector<std::uint8_t> read_exact(std::ifstream& in, std::size_t count,
                                     std::size_t offset_hint, const std::string& path) {
    std::vector<std::uint8_t> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got != count)
        throw IoError(path + ": expected " + std::to_string(offset_hint + count) +
                      " bytes, file ends after " + std::to_string(offset_hint + got));
    return buf;
}

} // namespace

VideoClip load_video(const std::string& path, VideoFormat format, int width, int height,
                     int count) {
    if (count <= 0) throw IoError("load_video: frame count must be positive");
    VideoClip clip;

    if (format == VideoFormat::image_sequence) {
        std::vector<std::string> files;
        for (const auto& entry : std::filesystem::directory_iterator(path)) {
            const auto ext = entry.path().extension().string();
            if (ext == ".png" || ext == ".ppm") files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        if (static_cast<int>(files.size()) < count)
            throw IoError(path + ": wanted " + std::to_string(count) + " frames, found " +
                          std::to_string(files.size()) + " image files");
        for (int i = 0; i < count; ++i) {
            Image8 img = files[static_cast<std::size_t>(i)].ends_with(".png")
                             ? png::read_png_file(files[static_cast<std::size_t>(i)])
                             : png::read_ppm_file(files[static_cast<std::size_t>(i)]);
            clip.frames.push_back(center_crop64(img));
        }
    } else {
        if (width < 64 || height < 64)
            throw IoError("load_video: declared dims " + std::to_string(width) + "x" +
                          std::to_string(height) + " are below 64x64");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        std::size_t offset = 0;
        for (int f = 0; f < count; ++f) {
            if (format == VideoFormat::raw_rgb24) {
                const std::size_t frame_bytes = static_cast<std::size_t>(width) * height * 3;
                auto buf = read_exact(in, frame_bytes, offset, path);
                offset += frame_bytes;
                Image8 img;
                img.width = width;
                img.height = height;
                img.rgb = std::move(buf);
                clip.frames.push_back(center_crop64(img));
            } else {
                if (width % 2 != 0 || height % 2 != 0)
                    throw IoError("yuv420 input dims must be even");
                const std::size_t ysize = static_cast<std::size_t>(width) * height;
                const std::size_t csize = ysize / 4;
                auto buf = read_exact(in, ysize + 2 * csize, offset, path);
                offset += ysize + 2 * csize;
                clip.frames.push_back(center_crop64(yuv420_to_rgb(
                    buf.data(), buf.data() + ysize, buf.data() + ysize + csize, width, height)));
            }
        }
    }

    clip.width = clip.frames[0].width;
    clip.height = clip.frames[0].height;
    for (const auto& f : clip.frames)
        if (f.width != clip.width || f.height != clip.height)
            throw IoError(path + ": frames disagree on dimensions after cropping");
    return clip;
}

void write_video_raw_rgb24(const std::string& path, const std::vector<Image8>& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& f : frames)
        out.write(reinterpret_cast<const char*>(f.rgb.data()),
                  static_cast<std::streamsize>(f.rgb.size()));
    if (!out) throw IoError("short write to " + path);
}

} // namespace eev::bench
