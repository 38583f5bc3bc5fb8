#include "cough/colormap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cough {

const std::array<Rgb, 256>& colormap_lut(Colormap map) {
  return map == Colormap::magma ? kMagmaLut : kViridisLut;
}

Rgb colormap_lookup(Colormap map, double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int idx = static_cast<int>(std::lround(t * 255.0));
  return colormap_lut(map)[static_cast<std::size_t>(idx)];
}

Colormap colormap_from_string(const std::string& name) {
  if (name == "magma") return Colormap::magma;
  if (name == "viridis") return Colormap::viridis;
  throw std::invalid_argument("unknown colormap: " + name);
}

std::string to_string(Colormap map) {
  return map == Colormap::magma ? "magma" : "viridis";
}

}  // namespace cough
