#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "terracomp/raster.hpp"

namespace terracomp {

/// Gray band of interest for the piecewise-linear window transform.
struct WindowSpec {
  std::uint32_t low = 0;        // grays <= low map to 0
  std::uint32_t high = 255;     // grays >= high map to out_max
  std::uint32_t out_max = 255;

  void validate() const {
    if (low >= high)
      throw std::invalid_argument("window: low must be less than high");
    if (out_max < 1)
      throw std::invalid_argument("window: out_max must be >= 1");
  }
};

/// Flattens grays outside [low, high] to 0 / out_max and linearly stretches
/// grays inside to [0, out_max].
inline Raster window_transform(const Raster& image, const WindowSpec& spec) {
  spec.validate();
  Raster out(image.width, image.height, spec.out_max);
  const double scale = static_cast<double>(spec.out_max) /
                       (static_cast<double>(spec.high) - spec.low);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const std::uint32_t g = image.data[i];
    if (g <= spec.low)
      out.data[i] = 0;
    else if (g >= spec.high)
      out.data[i] = spec.out_max;
    else
      out.data[i] = static_cast<std::uint32_t>(
          std::llround(scale * (static_cast<double>(g) - spec.low)));
  }
  return out;
}

}  // namespace terracomp
