#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dsatlas/image.hpp"

namespace dsatlas {

// Self-contained PNG codec: grayscale 8/16-bit, 8-bit indexed, and 8-bit RGB.
// The encoder emits stored-deflate zlib streams; the decoder handles the full
// inflate format (stored, fixed and dynamic Huffman) so files from other
// tools read fine. All writes are atomic (temp file + rename).

/// 8- or 16-bit grayscale PNG -> intensities in [0,1] (/255 or /65535).
GrayImage read_png_gray(const std::string& path);

/// 16-bit grayscale; intensities clamped to [0,1] and quantized to /65535.
void write_png_gray(const GrayImage& img, const std::string& path);

struct IndexedImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> indices;                 // row-major palette indices
    std::vector<std::array<std::uint8_t, 3>> palette;  // RGB entries
};

IndexedImage read_png_indexed(const std::string& path);
void write_png_indexed(const IndexedImage& img, const std::string& path);

/// interleaved RGB8, row-major
void write_png_rgb(int width, int height, const std::vector<std::uint8_t>& rgb,
                   const std::string& path);

namespace detail {
// zlib-format helpers, exposed for the codec tests
std::vector<std::uint8_t> zlib_compress_stored(const std::vector<std::uint8_t>& raw);
std::vector<std::uint8_t> zlib_decompress(const std::vector<std::uint8_t>& stream);
std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed = 0);
std::uint32_t adler32(const std::uint8_t* data, std::size_t n);
}  // namespace detail

}  // namespace dsatlas
