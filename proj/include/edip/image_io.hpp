#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace edip {

// Minimal PNG encoder (zlib-deflated, no interlacing).
// `pixels` is row-major, top row first; channels is 1 (gray) or 3 (RGB).
void write_png(const std::string& path, std::span<const unsigned char> pixels, int64_t width,
               int64_t height, int channels);

// Quantize a double image to 8-bit gray, mapping [lo, hi] -> [0, 255] with
// clamping, and write it. When lo == hi the output is mid-gray.
void write_png_gray(const std::string& path, std::span<const double> image, int64_t width,
                    int64_t height, double lo = 0.0, double hi = 1.0);

}  // namespace edip
