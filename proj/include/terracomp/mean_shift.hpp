#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "terracomp/features.hpp"
#include "terracomp/rng.hpp"

namespace terracomp {

struct MeanShiftResult {
  std::size_t n_dims = 0;
  std::vector<double> modes;  // m x d
  std::vector<int> labels;    // per sample, nearest mode

  std::size_t mode_count() const { return n_dims ? modes.size() / n_dims : 0; }
  std::span<const double> mode(std::size_t m) const {
    return {modes.data() + m * n_dims, n_dims};
  }
};

struct MeanShiftOptions {
  int max_iter = 300;
  double tol = 1e-3;
  std::size_t max_seeds = 0;  // 0 = shift from every sample
};

/// Gaussian-kernel mean shift. Every seed (all samples, or an evenly
/// strided subsample when max_seeds is set) is shifted until convergence;
/// converged points within merge_radius collapse to the lowest-index
/// representative, and each sample is labeled with its nearest mode.
inline MeanShiftResult mean_shift_fit(const FeatureMatrix& f, double bandwidth,
                                      double merge_radius,
                                      const MeanShiftOptions& opts = {}) {
  f.validate();
  if (bandwidth <= 0.0)
    throw std::invalid_argument("mean_shift_fit: bandwidth must be positive");
  if (merge_radius < 0.0)
    throw std::invalid_argument("mean_shift_fit: merge_radius must be >= 0");
  const std::size_t n = f.n_samples, d = f.n_dims;

  std::vector<std::size_t> seeds;
  if (opts.max_seeds > 0 && n > opts.max_seeds) {
    const std::size_t stride = (n + opts.max_seeds - 1) / opts.max_seeds;
    for (std::size_t i = 0; i < n; i += stride) seeds.push_back(i);
  } else {
    seeds.resize(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = i;
  }

  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  std::vector<double> converged;
  converged.reserve(seeds.size() * d);
  std::vector<double> y(d), next(d);
  for (const std::size_t s : seeds) {
    const auto start = f.sample(s);
    std::copy(start.begin(), start.end(), y.begin());
    for (int iter = 0; iter < opts.max_iter; ++iter) {
      std::fill(next.begin(), next.end(), 0.0);
      double wsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto x = f.sample(i);
        const double w = std::exp(-squared_distance({y.data(), d}, x) * inv2h2);
        wsum += w;
        for (std::size_t a = 0; a < d; ++a) next[a] += w * x[a];
      }
      for (std::size_t a = 0; a < d; ++a) next[a] /= wsum;
      const double shift = distance({y.data(), d}, {next.data(), d});
      std::swap(y, next);
      if (shift < opts.tol) break;
    }
    converged.insert(converged.end(), y.begin(), y.end());
  }

  MeanShiftResult res;
  res.n_dims = d;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const std::span<const double> p{converged.data() + s * d, d};
    bool merged = false;
    for (std::size_t m = 0; m < res.mode_count(); ++m)
      if (distance(p, res.mode(m)) <= merge_radius) {
        merged = true;
        break;
      }
    if (!merged) res.modes.insert(res.modes.end(), p.begin(), p.end());
  }

  res.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = f.sample(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < res.mode_count(); ++m) {
      const double dm = squared_distance(x, res.mode(m));
      if (dm < best) {
        best = dm;
        res.labels[i] = static_cast<int>(m);
      }
    }
  }
  return res;
}

/// Bandwidth heuristic: a low percentile of the pairwise distances over a
/// seeded random subset.
inline double estimate_bandwidth(const FeatureMatrix& f, double quantile = 0.15,
                                 std::size_t sample_cap = 2000,
                                 std::uint64_t seed = 0) {
  f.validate();
  const std::size_t n = f.n_samples;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n > sample_cap) {
    Rng rng(derive_seed(seed, "bandwidth"));
    for (std::size_t i = 0; i < sample_cap; ++i)
      std::swap(idx[i], idx[i + rng.next_below(n - i)]);
    idx.resize(sample_cap);
  }
  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      dists.push_back(distance(f.sample(idx[a]), f.sample(idx[b])));
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  const auto rank = static_cast<std::size_t>(
      quantile * static_cast<double>(dists.size() - 1));
  const double h = dists[rank];
  return h > 0.0 ? h : 1.0;
}

}  // namespace terracomp
