#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "terracomp/evaluation.hpp"
#include "terracomp/raster.hpp"
#include "terracomp/rng.hpp"

namespace terracomp {

enum class DepthClass { shallow, deep };
enum class ThicknessClass { thick, thin };
enum class NoiseModel { gaussian, poisson };

struct BodyAssignment {
  int type = 0;  // index into the absorbance table
  DepthClass depth = DepthClass::shallow;
  ThicknessClass thickness = ThicknessClass::thick;
};

/// Synthetic multispectral transmission phantom: a grid of absorbing square
/// bodies in front of a smoothly falling illumination field, blurred per
/// depth class, sampled as many noisy low-intensity frames. The absorbance
/// table is plumbing default data, not measured values.
struct PhantomSpec {
  int width = 480;
  int height = 444;
  int grid_rows = 4;
  int grid_cols = 4;
  int body_size_px = 44;
  std::vector<BodyAssignment> assignments;  // grid_rows x grid_cols, row-major
  std::vector<int> wavelengths_nm = {410, 450, 500, 590, 660, 734};
  std::vector<std::vector<double>> absorbance;  // [type][wavelength], mu >= 0
  double thickness_thin = 1.0;
  double thickness_thick = 2.0;
  std::vector<double> base_intensity;  // per wavelength, frame units
  double radial_falloff = 0.2;         // fraction lost at the far corner
  double blur_sigma_shallow = 2.0;
  double blur_sigma_deep = 10.0;
  double noise_sigma = 2.0;
  NoiseModel noise_model = NoiseModel::gaussian;
  int frames = 700;
  std::uint32_t frame_max = 4095;
  std::uint64_t seed = 20240101;

  int slot_count() const { return grid_rows * grid_cols; }

  void validate() const {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("phantom: dimensions must be positive");
    if (grid_rows < 1 || grid_cols < 1)
      throw std::invalid_argument("phantom: grid must be at least 1x1");
    if (body_size_px < 1)
      throw std::invalid_argument("phantom: body size must be >= 1");
    if (body_size_px > width / grid_cols || body_size_px > height / grid_rows)
      throw std::invalid_argument(
          "phantom: bodies of size " + std::to_string(body_size_px) +
          " overlap or exceed their grid slots");
    if (assignments.size() != static_cast<std::size_t>(slot_count()))
      throw std::invalid_argument("phantom: need one assignment per grid slot");
    if (wavelengths_nm.empty())
      throw std::invalid_argument("phantom: need at least one wavelength");
    if (base_intensity.size() != wavelengths_nm.size())
      throw std::invalid_argument(
          "phantom: base_intensity must match wavelength count");
    for (const auto& a : assignments) {
      if (a.type < 0 || static_cast<std::size_t>(a.type) >= absorbance.size())
        throw std::invalid_argument("phantom: assignment type out of range");
      if (absorbance[static_cast<std::size_t>(a.type)].size() !=
          wavelengths_nm.size())
        throw std::invalid_argument(
            "phantom: absorbance rows must match wavelength count");
    }
    for (const auto& row : absorbance)
      for (double mu : row)
        if (mu < 0.0)
          throw std::invalid_argument("phantom: absorbance must be >= 0");
    if (radial_falloff < 0.0 || radial_falloff >= 1.0)
      throw std::invalid_argument("phantom: radial_falloff must be in [0, 1)");
    if (blur_sigma_shallow < 0.0 || blur_sigma_deep < 0.0 || noise_sigma < 0.0)
      throw std::invalid_argument("phantom: sigmas must be >= 0");
    if (frames < 1)
      throw std::invalid_argument("phantom: need at least one frame");
    if (thickness_thin <= 0.0 || thickness_thick <= 0.0)
      throw std::invalid_argument("phantom: thicknesses must be positive");
  }
};

namespace detail {

// Separable Gaussian blur, replicate borders, kernel truncated at 3 sigma.
inline void gaussian_blur(std::vector<double>& img, int w, int h, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(radius) + 1);
  double norm = 0.0;
  for (int i = 0; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i)] =
        std::exp(-0.5 * (static_cast<double>(i) / sigma) * (static_cast<double>(i) / sigma));
    norm += (i == 0 ? 1.0 : 2.0) * kernel[static_cast<std::size_t>(i)];
  }
  for (auto& k : kernel) k /= norm;

  std::vector<double> tmp(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = kernel[0] * img[static_cast<std::size_t>(y) * w + x];
      for (int i = 1; i <= radius; ++i) {
        const int xl = std::max(0, x - i), xr = std::min(w - 1, x + i);
        s += kernel[static_cast<std::size_t>(i)] *
             (img[static_cast<std::size_t>(y) * w + xl] +
              img[static_cast<std::size_t>(y) * w + xr]);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = kernel[0] * tmp[static_cast<std::size_t>(y) * w + x];
      for (int i = 1; i <= radius; ++i) {
        const int yu = std::max(0, y - i), yd = std::min(h - 1, y + i);
        s += kernel[static_cast<std::size_t>(i)] *
             (tmp[static_cast<std::size_t>(yu) * w + x] +
              tmp[static_cast<std::size_t>(yd) * w + x]);
      }
      img[static_cast<std::size_t>(y) * w + x] = s;
    }
}

struct SlotGeometry {
  int x0, y0, x1, y1;  // inclusive body square
};

inline SlotGeometry slot_geometry(const PhantomSpec& spec, int row, int col) {
  const double cell_w = static_cast<double>(spec.width) / spec.grid_cols;
  const double cell_h = static_cast<double>(spec.height) / spec.grid_rows;
  const int cx = static_cast<int>((col + 0.5) * cell_w);
  const int cy = static_cast<int>((row + 0.5) * cell_h);
  const int half = spec.body_size_px / 2;
  return {cx - half, cy - half, cx - half + spec.body_size_px - 1,
          cy - half + spec.body_size_px - 1};
}

}  // namespace detail

/// Default 16-body layout mirroring the experimental arrangement: four body
/// types across the columns; rows 1 and 3 thick, rows 2 and 4 thin; the
/// first two rows shallow (sharp), the last two deep (blurred).
inline PhantomSpec default_phantom_spec() {
  PhantomSpec spec;
  spec.absorbance = {
      // per-type attenuation per unit thickness at the six wavelengths;
      // synthetic defaults chosen to give distinguishable 6-vector signatures
      {0.450, 0.375, 0.275, 0.200, 0.150, 0.125},
      {0.175, 0.225, 0.300, 0.400, 0.325, 0.250},
      {0.300, 0.310, 0.290, 0.280, 0.300, 0.290},
      {0.125, 0.175, 0.225, 0.275, 0.375, 0.450},
  };
  spec.base_intensity = {30.0, 26.0, 34.0, 24.0, 20.0, 22.0};
  spec.body_size_px = 32;
  spec.radial_falloff = 0.10;
  spec.blur_sigma_deep = 8.0;
  spec.assignments.resize(static_cast<std::size_t>(spec.slot_count()));
  for (int r = 0; r < spec.grid_rows; ++r)
    for (int c = 0; c < spec.grid_cols; ++c) {
      auto& a = spec.assignments[static_cast<std::size_t>(r * spec.grid_cols + c)];
      a.type = c % 4;
      a.depth = (r < 2) ? DepthClass::shallow : DepthClass::deep;
      a.thickness = (r % 2 == 0) ? ThicknessClass::thick : ThicknessClass::thin;
    }
  return spec;
}

/// Noise-free expected frame (real-valued) for one wavelength: illumination
/// times the blurred per-depth-class transmittance maps.
inline std::vector<double> phantom_ideal_image(const PhantomSpec& spec,
                                               std::size_t wavelength_index) {
  spec.validate();
  if (wavelength_index >= spec.wavelengths_nm.size())
    throw std::invalid_argument("phantom: wavelength index out of range");
  const int w = spec.width, h = spec.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  // transmittance per depth class, blurred independently
  std::vector<double> trans_shallow(n, 1.0), trans_deep(n, 1.0);
  for (int r = 0; r < spec.grid_rows; ++r)
    for (int c = 0; c < spec.grid_cols; ++c) {
      const auto& a = spec.assignments[static_cast<std::size_t>(r * spec.grid_cols + c)];
      const double thick = a.thickness == ThicknessClass::thick
                               ? spec.thickness_thick
                               : spec.thickness_thin;
      const double mu =
          spec.absorbance[static_cast<std::size_t>(a.type)][wavelength_index];
      const double t = std::exp(-mu * thick);
      auto& target =
          a.depth == DepthClass::shallow ? trans_shallow : trans_deep;
      const auto g = detail::slot_geometry(spec, r, c);
      for (int y = g.y0; y <= g.y1; ++y)
        for (int x = g.x0; x <= g.x1; ++x)
          target[static_cast<std::size_t>(y) * w + x] = t;
    }
  detail::gaussian_blur(trans_shallow, w, h, spec.blur_sigma_shallow);
  detail::gaussian_blur(trans_deep, w, h, spec.blur_sigma_deep);

  const double base = spec.base_intensity[wavelength_index];
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  const double r_max2 = cx * cx + cy * cy;
  std::vector<double> ideal(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double rho2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / r_max2;
      const double illum = base * (1.0 - spec.radial_falloff * rho2);
      ideal[i] = illum * trans_shallow[i] * trans_deep[i];
      if (ideal[i] > static_cast<double>(spec.frame_max))
        throw std::invalid_argument(
            "phantom: ideal intensity " + std::to_string(ideal[i]) +
            " exceeds frame range before noise at (" + std::to_string(x) +
            "," + std::to_string(y) + ")");
    }
  return ideal;
}

/// Streams the frames of one wavelength in order. Noise is drawn from a
/// per-wavelength sub-stream of the master seed, so wavelengths are
/// independent and the stream is identical however frames are consumed.
inline void phantom_for_each_frame(
    const PhantomSpec& spec, std::size_t wavelength_index,
    const std::function<void(const Raster&)>& fn) {
  const auto ideal = phantom_ideal_image(spec, wavelength_index);
  Rng rng(derive_seed(spec.seed, "phantom-frames", wavelength_index));
  Raster frame(spec.width, spec.height, spec.frame_max);
  const auto fmax = static_cast<double>(spec.frame_max);
  for (int f = 0; f < spec.frames; ++f) {
    for (std::size_t i = 0; i < ideal.size(); ++i) {
      double v;
      if (spec.noise_model == NoiseModel::gaussian) {
        v = ideal[i] + (spec.noise_sigma > 0.0
                            ? spec.noise_sigma * rng.next_normal()
                            : 0.0);
        v = std::llround(std::min(std::max(v, 0.0), fmax));
      } else {
        v = static_cast<double>(
            std::min<std::uint64_t>(rng.next_poisson(ideal[i]), spec.frame_max));
      }
      frame.data[i] = static_cast<std::uint32_t>(v);
    }
    fn(frame);
  }
}

inline FrameStack phantom_generate_stack(const PhantomSpec& spec,
                                         std::size_t wavelength_index) {
  FrameStack stack;
  stack.frames.reserve(static_cast<std::size_t>(spec.frames));
  phantom_for_each_frame(spec, wavelength_index,
                         [&](const Raster& fr) { stack.frames.push_back(fr); });
  return stack;
}

/// Accumulates the frames of one wavelength without materializing the
/// stack; identical to accumulate_frames over phantom_generate_stack.
inline Raster phantom_accumulate(const PhantomSpec& spec,
                                 std::size_t wavelength_index) {
  std::vector<std::uint64_t> sums(
      static_cast<std::size_t>(spec.width) * spec.height, 0);
  phantom_for_each_frame(spec, wavelength_index, [&](const Raster& fr) {
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += fr.data[i];
  });
  Raster out(spec.width, spec.height, 0);
  std::uint32_t maxv = 0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out.data[i] = static_cast<std::uint32_t>(sums[i]);
    maxv = std::max(maxv, out.data[i]);
  }
  out.max_value = maxv;
  return out;
}

/// Exact unblurred body masks, numbered row-major.
inline BodyTemplate phantom_truth(const PhantomSpec& spec) {
  spec.validate();
  BinaryMask mask(spec.width, spec.height);
  for (int r = 0; r < spec.grid_rows; ++r)
    for (int c = 0; c < spec.grid_cols; ++c) {
      const auto g = detail::slot_geometry(spec, r, c);
      for (int y = g.y0; y <= g.y1; ++y)
        for (int x = g.x0; x <= g.x1; ++x) mask.set(x, y, true);
    }
  return extract_bodies(mask);
}

struct PhantomOutput {
  std::vector<FrameStack> stacks;  // one per wavelength
  BodyTemplate truth;
};

/// Materializes every wavelength's stack. Memory-heavy for full-size specs;
/// prefer the streaming helpers in the pipeline.
inline PhantomOutput phantom_generate(const PhantomSpec& spec) {
  spec.validate();
  PhantomOutput out;
  out.truth = phantom_truth(spec);
  for (std::size_t li = 0; li < spec.wavelengths_nm.size(); ++li)
    out.stacks.push_back(phantom_generate_stack(spec, li));
  return out;
}

}  // namespace terracomp
