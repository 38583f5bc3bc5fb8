#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace cough {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

enum class Colormap { magma, viridis };

extern const std::array<Rgb, 256> kMagmaLut;
extern const std::array<Rgb, 256> kViridisLut;

const std::array<Rgb, 256>& colormap_lut(Colormap map);

// t is clamped to [0, 1] and quantized to the nearest of 256 LUT entries.
Rgb colormap_lookup(Colormap map, double t);

Colormap colormap_from_string(const std::string& name);
std::string to_string(Colormap map);

}  // namespace cough
