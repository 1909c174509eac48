#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "terracomp/raster.hpp"

namespace terracomp {

/// Sample-major matrix of per-pixel feature vectors. Sample i corresponds
/// to pixel i in row-major order; one coordinate per channel in wavelength
/// order.
struct FeatureMatrix {
  std::size_t n_samples = 0;
  std::size_t n_dims = 0;
  std::vector<double> values;  // row-major, n_samples x n_dims

  std::span<const double> sample(std::size_t i) const {
    return {values.data() + i * n_dims, n_dims};
  }
  std::span<double> sample(std::size_t i) {
    return {values.data() + i * n_dims, n_dims};
  }

  void validate() const {
    if (n_samples == 0 || n_dims == 0)
      throw std::invalid_argument("feature matrix: empty");
    if (values.size() != n_samples * n_dims)
      throw std::invalid_argument("feature matrix: length != samples*dims");
    for (double v : values)
      if (!std::isfinite(v))
        throw std::invalid_argument("feature matrix: non-finite value");
  }
};

/// Stacks the channels of a multi-wavelength image into per-pixel feature
/// vectors (row-major pixel order).
inline FeatureMatrix stack_channels(const MultiChannelImage& image) {
  image.validate();
  const auto& ref = image.channels.front().image;
  FeatureMatrix m;
  m.n_samples = ref.size();
  m.n_dims = image.channels.size();
  m.values.resize(m.n_samples * m.n_dims);
  for (std::size_t c = 0; c < image.channels.size(); ++c) {
    const auto& data = image.channels[c].image.data;
    for (std::size_t i = 0; i < m.n_samples; ++i)
      m.values[i * m.n_dims + c] = static_cast<double>(data[i]);
  }
  return m;
}

/// Euclidean distance between two feature vectors.
inline double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("distance: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// In-place z-scoring per dimension (optional experimentation flag in the
/// pipeline; the default feature space is raw window-transformed levels).
inline void standardize(FeatureMatrix& m) {
  for (std::size_t d = 0; d < m.n_dims; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.n_samples; ++i)
      mean += m.values[i * m.n_dims + d];
    mean /= static_cast<double>(m.n_samples);
    double var = 0.0;
    for (std::size_t i = 0; i < m.n_samples; ++i) {
      const double dv = m.values[i * m.n_dims + d] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(m.n_samples);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < m.n_samples; ++i)
      m.values[i * m.n_dims + d] = (m.values[i * m.n_dims + d] - mean) / sd;
  }
}

/// Row-major unflattening of cluster labels back into an image; inverse of
/// the stack_channels pixel ordering.
inline Raster labels_to_image(const std::vector<int>& labels, int width,
                              int height) {
  if (labels.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("labels_to_image: length mismatch");
  int maxl = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("labels_to_image: negative label");
    maxl = std::max(maxl, l);
  }
  Raster out(width, height, static_cast<std::uint32_t>(maxl));
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.data[i] = static_cast<std::uint32_t>(labels[i]);
  return out;
}

}  // namespace terracomp
