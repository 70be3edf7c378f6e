#pragma once

#include "layersep/image.hpp"

#include <filesystem>
#include <string>

namespace layersep {

/// Grayscale PNG, 8 or 16 bits. Code c of depth d maps to c / (2^d - 1).
Image read_png(const std::filesystem::path& path);
Image decode_png(const std::string& bytes);

/// Values are clamped to [0, 1] and rounded to the nearest code.
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 16);
std::string encode_png(const Image& image, int bit_depth = 16);

/// Masks are stored as 8-bit 0/255; decoding thresholds at 0.5.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

}  // namespace layersep
