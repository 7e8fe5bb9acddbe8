#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "apga/errors.hpp"

namespace apga::io {

/// Grayscale raster with 8- or 16-bit samples, values already widened to u16.
struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> pixels;  // row-major, height*width
};

GrayImage read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const GrayImage& img);

// 8-bit binary PGM (P5); used for quick mask dumps.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& pixels);
GrayImage read_pgm(const std::string& path);

}  // namespace apga::io
