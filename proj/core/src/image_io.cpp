#include "starpoly/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "starpoly/errors.hpp"

namespace starpoly {

namespace {

struct File {
  std::FILE* f;
  ~File() {
    if (f) std::fclose(f);
  }
};

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw IoError(std::string("libpng: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

RasterImage read_png(const std::filesystem::path& path) {
  File file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8))
    throw IoError("not a PNG file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  RasterImage img;
  try {
    png_init_io(png, file.f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = png_get_channels(png, info);
    img.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> buf(rowbytes * static_cast<std::size_t>(img.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    const std::size_t n = static_cast<std::size_t>(img.height) * img.width * img.channels;
    img.samples.resize(n);
    if (img.bit_depth == 16) {
      for (std::size_t i = 0; i < n; ++i)
        img.samples[i] = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    } else {
      for (std::size_t i = 0; i < n; ++i) img.samples[i] = buf[i];
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (img.channels == 2 || img.channels == 4)
    throw IoError("unsupported PNG channel layout: " + path.string());
  return img;
}

void write_png(const std::filesystem::path& path, const RasterImage& image) {
  require(image.channels == 1 || image.channels == 3, "write_png: 1 or 3 channels required");
  require(image.bit_depth == 8 || image.bit_depth == 16, "write_png: bit depth 8 or 16 required");
  require(image.samples.size() ==
              static_cast<std::size_t>(image.height) * image.width * image.channels,
          "write_png: sample count mismatch");
  File file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, file.f);
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), image.bit_depth,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t per_row = static_cast<std::size_t>(image.width) * image.channels;
    const std::size_t bytes = image.bit_depth / 8;
    std::vector<png_byte> row(per_row * bytes);
    for (int y = 0; y < image.height; ++y) {
      const std::uint16_t* src = image.samples.data() + per_row * y;
      for (std::size_t i = 0; i < per_row; ++i) {
        if (bytes == 2) {
          row[2 * i] = static_cast<png_byte>(src[i] >> 8);  // PNG is big-endian
          row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
        } else {
          row[i] = static_cast<png_byte>(src[i]);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.f) != 0) throw IoError("write failed: " + path.string());
}

RasterImage gray8(int height, int width, const std::vector<std::uint8_t>& pixels) {
  RasterImage img;
  img.height = height;
  img.width = width;
  img.samples.assign(pixels.begin(), pixels.end());
  return img;
}

Tensor<float> to_tensor(const RasterImage& image) {
  Tensor<float> t(Shape{static_cast<std::size_t>(image.height), static_cast<std::size_t>(image.width),
                        static_cast<std::size_t>(image.channels)});
  const float scale = image.bit_depth == 16 ? 65535.0f : 255.0f;
  for (std::size_t i = 0; i < image.samples.size(); ++i) t[i] = image.samples[i] / scale;
  return t;
}

void write_label_png(const std::filesystem::path& path, const LabelMask& mask) {
  RasterImage img;
  img.height = mask.height;
  img.width = mask.width;
  img.bit_depth = 16;
  img.samples.resize(mask.ids.size());
  for (std::size_t i = 0; i < mask.ids.size(); ++i) {
    require(mask.ids[i] < 65536, "write_label_png: id exceeds 16 bits");
    img.samples[i] = static_cast<std::uint16_t>(mask.ids[i]);
  }
  write_png(path, img);
}

void write_class_png(const std::filesystem::path& path, const LabelMask& mask) {
  require(mask.has_classes(), "write_class_png: mask has no classes");
  RasterImage img;
  img.height = mask.height;
  img.width = mask.width;
  img.samples.assign(mask.classes.begin(), mask.classes.end());
  write_png(path, img);
}

LabelMask read_label_png(const std::filesystem::path& path) {
  const RasterImage img = read_png(path);
  if (img.channels != 1) throw IoError("label mask must be single-channel: " + path.string());
  LabelMask mask(img.height, img.width);
  for (std::size_t i = 0; i < img.samples.size(); ++i) mask.ids[i] = img.samples[i];
  return mask;
}

void read_class_png(const std::filesystem::path& path, LabelMask& mask) {
  const RasterImage img = read_png(path);
  if (img.channels != 1 || img.height != mask.height || img.width != mask.width)
    throw IoError("class mask does not match its label mask: " + path.string());
  mask.classes.resize(img.samples.size());
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    mask.classes[i] = static_cast<std::uint8_t>(std::min<std::uint16_t>(img.samples[i], 255));
}

}  // namespace starpoly
