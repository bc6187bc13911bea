#pragma once

#include <string>

#include "eev/image.hpp"

namespace eev::bench {

enum class VideoFormat { raw_rgb24, yuv420_8bit, image_sequence };

VideoFormat format_from_name(const std::string& name);
const char* format_name(VideoFormat f);

struct VideoClip {
    std::vector<Image8> frames;
    int width = 0;  // post-crop
    int height = 0; // post-crop
    double fps = 30.0;
    std::string name;
    std::string class_label;
};

// Center-crops to the largest contained multiple-of-64 box.
Image8 center_crop64(const Image8& image);

// Loads exactly `count` frames, converting YUV420 sources to RGB with the
// BT.601 full-range matrix, then center-crops every frame. `width`/`height`
// are the source dimensions (for the raw formats). For image sequences,
// `path` is a directory of .png/.ppm files taken in name order.
VideoClip load_video(const std::string& path, VideoFormat format, int width, int height,
                     int count);

void write_video_raw_rgb24(const std::string& path, const std::vector<Image8>& frames);

// BT.601 full-range conversion of one frame; chroma planes are half
// resolution and get replicated to full size.
Image8 yuv420_to_rgb(const std::uint8_t* y, const std::uint8_t* u, const std::uint8_t* v,
                     int width, int height);

} // namespace eev::bench
