#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "terracomp/features.hpp"
#include "terracomp/rng.hpp"

namespace terracomp {

enum class KmeansInit { random, dsquared };

struct CentroidModel {
  int k = 0;
  std::size_t n_dims = 0;
  std::vector<double> centroids;  // k x n_dims, row-major
  double inertia = 0.0;           // sum of squared distances to nearest centroid
  int iterations = 0;
  std::vector<double> inertia_trace;  // one entry per assignment pass

  std::span<const double> centroid(int c) const {
    return {centroids.data() + static_cast<std::size_t>(c) * n_dims, n_dims};
  }
};

struct KmeansResult {
  CentroidModel model;
  std::vector<int> labels;
};

namespace detail {

inline std::vector<double> seed_centroids(const FeatureMatrix& f, int k,
                                          KmeansInit init, Rng& rng) {
  const std::size_t n = f.n_samples, d = f.n_dims;
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * d);
  auto push_sample = [&](std::size_t i) {
    const auto s = f.sample(i);
    centroids.insert(centroids.end(), s.begin(), s.end());
  };

  if (init == KmeansInit::random) {
    // partial Fisher-Yates over the sample indices
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (int c = 0; c < k; ++c) {
      const std::size_t j = c + rng.next_below(n - static_cast<std::size_t>(c));
      std::swap(idx[static_cast<std::size_t>(c)], idx[j]);
      push_sample(idx[static_cast<std::size_t>(c)]);
    }
    return centroids;
  }

  // distance-squared-weighted sequential seeding
  push_sample(rng.next_below(n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i)
    d2[i] = squared_distance(f.sample(i), {centroids.data(), d});
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double w : d2) total += w;
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = rng.next_double() * total;
      double cum = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > target) {
          chosen = i;
          break;
        }
      }
    } else {
      // all remaining points coincide with chosen centroids
      chosen = rng.next_below(n);
    }
    push_sample(chosen);
    const std::span<const double> nc{
        centroids.data() + static_cast<std::size_t>(c) * d, d};
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(f.sample(i), nc));
  }
  return centroids;
}

}  // namespace detail

/// Lloyd's algorithm. All randomness comes from the seed; empty clusters
/// are re-seeded to the sample farthest from its assigned centroid; label
/// ties go to the lowest centroid index.
inline KmeansResult kmeans_fit(const FeatureMatrix& f, int k, KmeansInit init,
                               std::uint64_t seed, int max_iter = 100,
                               double tol = 1e-6) {
  f.validate();
  const std::size_t n = f.n_samples, d = f.n_dims;
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kmeans_fit: k must be in [1, n_samples]");

  Rng rng(derive_seed(seed, "kmeans"));
  KmeansResult res;
  auto& model = res.model;
  model.k = k;
  model.n_dims = d;
  model.centroids = detail::seed_centroids(f, k, init, rng);
  res.labels.assign(n, 0);

  std::vector<double> dist_to_own(n, 0.0);
  auto assign = [&]() {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = f.sample(i);
      double best = std::numeric_limits<double>::infinity();
      int bestc = 0;
      for (int c = 0; c < k; ++c) {
        const double d2 = squared_distance(s, model.centroid(c));
        if (d2 < best) {
          best = d2;
          bestc = c;
        }
      }
      res.labels[i] = bestc;
      dist_to_own[i] = best;
      inertia += best;
    }
    return inertia;
  };

  std::vector<double> sums(static_cast<std::size_t>(k) * d);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));
  for (int iter = 1; iter <= max_iter; ++iter) {
    model.iterations = iter;
    model.inertia = assign();
    model.inertia_trace.push_back(model.inertia);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = f.sample(i);
      const auto c = static_cast<std::size_t>(res.labels[i]);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += s[j];
      ++counts[c];
    }

    std::vector<double> next(model.centroids);
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        for (std::size_t j = 0; j < d; ++j)
          next[static_cast<std::size_t>(c) * d + j] =
              sums[static_cast<std::size_t>(c) * d + j] /
              static_cast<double>(counts[static_cast<std::size_t>(c)]);

    // re-seed empty clusters to the worst-fit samples
    std::vector<char> taken(n, 0);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = 0;
      double farv = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && dist_to_own[i] > farv) {
          farv = dist_to_own[i];
          far = i;
        }
      taken[far] = 1;
      const auto s = f.sample(far);
      for (std::size_t j = 0; j < d; ++j)
        next[static_cast<std::size_t>(c) * d + j] = s[j];
    }

    double shift = 0.0;
    for (int c = 0; c < k; ++c)
      shift = std::max(shift, distance(model.centroid(c),
                                       {next.data() + static_cast<std::size_t>(c) * d, d}));
    model.centroids = std::move(next);
    if (shift < tol) break;
  }

  model.inertia = assign();  // labels consistent with final centroids
  model.inertia_trace.push_back(model.inertia);
  return res;
}

}  // namespace terracomp
