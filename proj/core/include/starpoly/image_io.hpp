#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "starpoly/label_mask.hpp"
#include "starpoly/tensor.hpp"

namespace starpoly {

/// Decoded PNG. Samples are row-major interleaved; 8-bit files hold 0..255,
/// 16-bit files 0..65535.
struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 1;  // 1 gray, 3 RGB
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

/// Reads gray/gray-alpha/RGB/RGBA/palette PNGs; alpha is dropped, palettes
/// expand to RGB. Throws IoError.
RasterImage read_png(const std::filesystem::path& path);

/// Writes with fixed zlib level and filter so identical input gives identical bytes.
void write_png(const std::filesystem::path& path, const RasterImage& image);

RasterImage gray8(int height, int width, const std::vector<std::uint8_t>& pixels);

/// Image as [H,W,C] floats in [0,1].
Tensor<float> to_tensor(const RasterImage& image);

/// Instance ids as a 16-bit gray PNG (ids must be < 65536).
void write_label_png(const std::filesystem::path& path, const LabelMask& mask);
/// Class mask as an 8-bit gray PNG.
void write_class_png(const std::filesystem::path& path, const LabelMask& mask);
LabelMask read_label_png(const std::filesystem::path& path);
/// Attaches the class mask stored at path to mask.
void read_class_png(const std::filesystem::path& path, LabelMask& mask);

}  // namespace starpoly
