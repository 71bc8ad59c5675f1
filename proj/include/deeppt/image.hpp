#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpt {

/// 8-bit luminance raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0) {
    if (w < 1 || h < 1) throw std::invalid_argument("image extents must be >= 1");
  }

  uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // r,g,b interleaved

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t* at(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
  static RgbImage from_gray(const GrayImage& g);
};

/// 16-bit, 3-channel raster (the KITTI flow container format).
struct Rgb16Image {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> pixels;  // r,g,b interleaved

  Rgb16Image() = default;
  Rgb16Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint16_t& at(int x, int y, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  uint16_t at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

/// Decodes PGM (P5/P2), PNG, or BMP, sniffing the format from the leading
/// bytes. Color inputs collapse to luminance 0.299 r + 0.587 g + 0.114 b,
/// rounded to nearest.
GrayImage load_gray_image(const std::string& path);

void save_pgm(const GrayImage& img, const std::string& path);
void save_png_gray8(const GrayImage& img, const std::string& path);
void save_png_rgb8(const RgbImage& img, const std::string& path);
void save_png_rgb16(const Rgb16Image& img, const std::string& path);
void save_bmp_gray8(const GrayImage& img, const std::string& path);

/// Raw 16-bit 3-channel PNG load; rejects anything shallower or narrower.
Rgb16Image load_png_rgb16(const std::string& path);

uint8_t rgb_to_luma(uint8_t r, uint8_t g, uint8_t b);

}  // namespace dpt
