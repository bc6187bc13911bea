#pragma once

// Minimal PNG support for the intra-backend file contract and image-sequence
// I/O. The writer emits 8-bit RGB with stored (uncompressed) deflate blocks;
// the reader handles arbitrary baseline PNGs: stored, fixed, and dynamic
// Huffman deflate, all five scanline filters, gray/RGB with or without alpha.
// Interlaced and palette images are rejected.

#include <string>

#include "eev/image.hpp"

namespace eev::png {

std::vector<std::uint8_t> encode_png(const Image8& image);
Image8 decode_png(const std::vector<std::uint8_t>& bytes);

void write_png_file(const std::string& path, const Image8& image);
Image8 read_png_file(const std::string& path);

// P6 PPM, used by the image-sequence video format.
std::vector<std::uint8_t> encode_ppm(const Image8& image);
Image8 decode_ppm(const std::vector<std::uint8_t>& bytes);
void write_ppm_file(const std::string& path, const Image8& image);
Image8 read_ppm_file(const std::string& path);

} // namespace eev::png
