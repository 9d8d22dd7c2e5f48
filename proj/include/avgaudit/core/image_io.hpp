#pragma once

#include "avgaudit/core/image.hpp"

#include <filesystem>

namespace avgaudit {

// 8- or 16-bit grayscale/RGB PNG -> Image with values in [0,255]
// (16-bit samples scaled by 255/65535). Throws DecodeError otherwise.
Image load_image(const std::filesystem::path& path);

// Writes an 8-bit (rounded, clipped to [0,255]) or 16-bit PNG.
// Returns the number of samples that had to be clipped.
std::size_t save_png(const Image& image, const std::filesystem::path& path, int bit_depth = 8);

// ---------------------------------------------------------------------------
// AVGI float raster:
//   "AVGI" | u32 height | u32 width | u32 channels | f32[h*w*c]
// all little-endian, row-major, channel-interleaved.
// ---------------------------------------------------------------------------
void save_float_raster(const Image& image, const std::filesystem::path& path);
Image load_float_raster(const std::filesystem::path& path);

// Dispatches on the file's leading bytes (AVGI magic or PNG signature).
Image load_any(const std::filesystem::path& path);

} // namespace avgaudit
