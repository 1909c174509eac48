#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace terracomp {

/// Single-channel 2-D grid of non-negative integer gray intensities with a
/// declared maximum. Values are stored row-major.
struct Raster {
  int width = 0;
  int height = 0;
  std::uint32_t max_value = 0;  // declared gray ceiling, >= every sample
  std::vector<std::uint32_t> data;

  Raster() = default;
  Raster(int w, int h, std::uint32_t maxv, std::uint32_t fill = 0)
      : width(w), height(h), max_value(maxv),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::size_t size() const { return data.size(); }

  std::uint32_t& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint32_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  bool same_shape(const Raster& o) const {
    return width == o.width && height == o.height;
  }

  bool operator==(const Raster& o) const {
    return width == o.width && height == o.height && max_value == o.max_value &&
           data == o.data;
  }

  void validate() const {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("raster: width and height must be positive");
    if (data.size() != static_cast<std::size_t>(width) * height)
      throw std::invalid_argument("raster: data length != width*height");
    for (std::uint32_t v : data)
      if (v > max_value)
        throw std::invalid_argument("raster: value " + std::to_string(v) +
                                    " exceeds declared max " +
                                    std::to_string(max_value));
  }
};

/// Actual minimum/maximum of the stored samples (not the declared ceiling).
inline std::pair<std::uint32_t, std::uint32_t> value_range(const Raster& r) {
  if (r.data.empty()) throw std::invalid_argument("value_range: empty raster");
  auto [mn, mx] = std::minmax_element(r.data.begin(), r.data.end());
  return {*mn, *mx};
}

/// Sequence of dimension-identical rasters (the frames of one wavelength).
struct FrameStack {
  std::vector<Raster> frames;

  std::size_t count() const { return frames.size(); }
};

struct Channel {
  int wavelength_nm = 0;
  Raster image;
};

/// Per-wavelength rasters of identical dimensions, wavelengths strictly
/// increasing.
struct MultiChannelImage {
  std::vector<Channel> channels;

  void validate() const {
    if (channels.empty())
      throw std::invalid_argument("multi-channel image: no channels");
    for (std::size_t i = 0; i < channels.size(); ++i) {
      channels[i].image.validate();
      if (i > 0) {
        if (channels[i].wavelength_nm <= channels[i - 1].wavelength_nm)
          throw std::invalid_argument(
              "multi-channel image: wavelengths must be strictly increasing");
        if (!channels[i].image.same_shape(channels[0].image))
          throw std::invalid_argument(
              "multi-channel image: channel dimensions differ");
      }
    }
  }
};

/// Elementwise sum over all frames, summed in frame order. The output
/// max_value is the computed maximum of the sums.
inline Raster accumulate_frames(const FrameStack& stack) {
  if (stack.frames.empty())
    throw std::invalid_argument("accumulate_frames: empty stack");
  const Raster& first = stack.frames.front();
  const std::size_t n = first.size();
  for (std::size_t f = 1; f < stack.frames.size(); ++f)
    if (!stack.frames[f].same_shape(first))
      throw std::invalid_argument(
          "accumulate_frames: dimension mismatch at frame " + std::to_string(f));

  std::vector<std::uint64_t> sums(n, 0);
  for (const Raster& fr : stack.frames)
    for (std::size_t i = 0; i < n; ++i) sums[i] += fr.data[i];

  constexpr std::uint64_t kCeiling = std::numeric_limits<std::uint32_t>::max();
  Raster out(first.width, first.height, 0);
  std::uint32_t maxv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sums[i] > kCeiling) {
      const int x = static_cast<int>(i) % first.width;
      const int y = static_cast<int>(i) / first.width;
      throw std::overflow_error("accumulate_frames: sum at pixel (" +
                                std::to_string(x) + "," + std::to_string(y) +
                                ") exceeds 32-bit range");
    }
    const auto v = static_cast<std::uint32_t>(sums[i]);
    out.data[i] = v;
    maxv = std::max(maxv, v);
  }
  out.max_value = maxv;
  return out;
}

/// Median filter with a square window; borders handled by replicating the
/// nearest edge pixel. Output max_value is unchanged.
inline Raster median_filter(const Raster& image, int window) {
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("median_filter: window must be odd and >= 1");
  if (window > std::min(image.width, image.height))
    throw std::invalid_argument(
        "median_filter: window exceeds image dimensions");
  if (window == 1) return image;

  const int r = window / 2;
  Raster out(image.width, image.height, image.max_value);
  std::vector<std::uint32_t> buf;
  buf.reserve(static_cast<std::size_t>(window) * window);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      buf.clear();
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::clamp(y + dy, 0, image.height - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = std::clamp(x + dx, 0, image.width - 1);
          buf.push_back(image.at(xx, yy));
        }
      }
      auto mid = buf.begin() + buf.size() / 2;
      std::nth_element(buf.begin(), mid, buf.end());
      out.at(x, y) = *mid;
    }
  }
  return out;
}

}  // namespace terracomp
