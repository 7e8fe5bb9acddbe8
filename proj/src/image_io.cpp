#include "apga/io/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace apga::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage read_png_gray(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw io_error("cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("unreadable image: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  // Normalize everything to 8- or 16-bit grayscale.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (depth == 16) png_set_swap(png);  // PNG is big-endian on disk
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);

  GrayImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.bit_depth = depth;
  img.pixels.resize(static_cast<std::size_t>(w) * h);

  std::vector<std::uint8_t> rowbuf(png_get_rowbytes(png, info));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    if (depth == 16) {
      const auto* row16 = reinterpret_cast<const std::uint16_t*>(rowbuf.data());
      for (png_uint_32 x = 0; x < w; ++x) img.pixels[y * w + x] = row16[x];
    } else {
      for (png_uint_32 x = 0; x < w; ++x) img.pixels[y * w + x] = rowbuf[x];
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png_gray(const std::string& path, const GrayImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw io_error("write_png_gray: bit depth must be 8 or 16");
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw io_error("write_png_gray: pixel buffer does not match dimensions");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw io_error("cannot open image for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("write failed for image: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), img.bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (img.bit_depth == 16) png_set_swap(png);

  if (img.bit_depth == 8) {
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        row[static_cast<std::size_t>(x)] =
            static_cast<std::uint8_t>(img.pixels[static_cast<std::size_t>(y) * img.width + x]);
      png_write_row(png, row.data());
    }
  } else {
    for (int y = 0; y < img.height; ++y) {
      png_write_row(png, reinterpret_cast<png_const_bytep>(
                             img.pixels.data() + static_cast<std::size_t>(y) * img.width));
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw io_error("write_pgm: pixel buffer does not match dimensions");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw io_error("cannot open image for writing: " + path);
  std::fprintf(f, "P5\n%d %d\n255\n", width, height);
  std::fwrite(pixels.data(), 1, pixels.size(), f);
  std::fclose(f);
}

GrayImage read_pgm(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw io_error("cannot open image: " + path);
  FilePtr guard(f);
  int w = 0, h = 0, maxv = 0;
  if (std::fscanf(f, "P5 %d %d %d", &w, &h, &maxv) != 3 || maxv != 255)
    throw io_error("unsupported PGM: " + path);
  std::fgetc(f);  // single whitespace after header
  GrayImage img;
  img.width = w;
  img.height = h;
  img.bit_depth = 8;
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
  if (std::fread(buf.data(), 1, buf.size(), f) != buf.size())
    throw io_error("truncated PGM: " + path);
  img.pixels.assign(buf.begin(), buf.end());
  return img;
}

}  // namespace apga::io
