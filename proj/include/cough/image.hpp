#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cough/colormap.hpp"

namespace cough {

// 8-bit RGB raster, row-major, row 0 at the top.
struct ImageRgb {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  ImageRgb() = default;
  ImageRgb(int w, int h)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  Rgb at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
  }

  bool operator==(const ImageRgb&) const = default;
};

void write_png(const std::filesystem::path& path, const ImageRgb& image);
ImageRgb read_png(const std::filesystem::path& path);

}  // namespace cough
