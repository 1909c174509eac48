#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "terracomp/raster.hpp"

namespace terracomp {

/// Half-open gray interval [lower, upper) with the number of pixels falling
/// inside it.
struct GraySegment {
  std::uint64_t lower = 0;  // inclusive
  std::uint64_t upper = 0;  // exclusive
  std::uint64_t count = 0;
};

/// Ordered, contiguous segmentation of a raster's gray range. The last
/// segment's upper bound is source_max + 1 so that every occurring gray,
/// including the maximum, lies in exactly one half-open segment.
struct SegmentedHistogram {
  std::vector<GraySegment> segments;
  std::uint64_t source_min = 0;
  std::uint64_t source_max = 0;

  std::uint64_t total_count() const {
    std::uint64_t t = 0;
    for (const auto& s : segments) t += s.count;
    return t;
  }

  void validate() const {
    if (segments.empty())
      throw std::invalid_argument("segmented histogram: no segments");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (segments[i].lower >= segments[i].upper)
        throw std::invalid_argument("segmented histogram: empty segment");
      if (i > 0 && segments[i - 1].upper != segments[i].lower)
        throw std::invalid_argument("segmented histogram: segments not contiguous");
    }
    if (segments.front().lower != source_min ||
        segments.back().upper <= source_max ||
        segments.back().lower > source_max)
      throw std::invalid_argument("segmented histogram: bounds do not cover range");
  }
};

struct GrayRange {
  std::uint64_t lower = 0;  // inclusive
  std::uint64_t upper = 0;  // exclusive

  std::uint64_t width() const { return upper > lower ? upper - lower : 0; }
  bool operator==(const GrayRange&) const = default;
};

/// Everything the automatic threshold selection produced for one image.
struct ThresholdSelection {
  std::uint64_t gradient_threshold = 0;  // G, gray units
  std::uint64_t area_threshold = 0;      // A, pixels
  int demarcation_index = 0;             // 1-based segment index
  GrayRange heterogeneous_range;
  GrayRange background_range;
  GrayRange accurate_range;
  int iterations = 0;  // number of re-compressions in the area-growth loop
  int compressed_max_level = 0;
};

struct Terrace {
  std::uint32_t start_gray = 0;  // inclusive
  std::uint32_t end_gray = 0;    // inclusive, last occurring gray in terrace
  int level = 0;                 // 1-based
};

/// Monotone mapping from occurring gray values to consecutive levels 1..K.
struct TerraceMap {
  std::vector<Terrace> terraces;

  int level_count() const { return static_cast<int>(terraces.size()); }

  int level_of(std::uint32_t gray) const {
    for (auto it = terraces.rbegin(); it != terraces.rend(); ++it)
      if (gray >= it->start_gray) return it->level;
    return terraces.empty() ? 0 : 1;
  }
};

namespace detail {

inline std::int64_t round_half_away(double v) {
  return std::llround(v);  // llround rounds halfway cases away from zero
}

// Sorted (gray, pixel count) pairs of the occurring values.
inline std::vector<std::pair<std::uint32_t, std::uint64_t>> value_counts(
    const Raster& image) {
  std::map<std::uint32_t, std::uint64_t> hist;
  for (std::uint32_t v : image.data) ++hist[v];
  return {hist.begin(), hist.end()};
}

}  // namespace detail

/// Step 2: divide the gray range uniformly into n segments. Boundaries are
/// real-valued and rounded half away from zero; duplicate boundaries (range
/// narrower than the segment count) are dropped.
inline SegmentedHistogram build_segments(const Raster& image, int n_segments) {
  if (n_segments < 2)
    throw std::invalid_argument("build_segments: need at least 2 segments");
  const auto [mn, mx] = value_range(image);
  if (mn == mx)
    throw std::invalid_argument(
        "build_segments: degenerate gray range (constant image, gray " +
        std::to_string(mn) + ")");

  const double span = static_cast<double>(mx) - static_cast<double>(mn);
  std::vector<std::uint64_t> bounds;
  bounds.reserve(static_cast<std::size_t>(n_segments) + 1);
  bounds.push_back(mn);
  for (int k = 1; k < n_segments; ++k) {
    const double b = static_cast<double>(mn) + static_cast<double>(k) * span /
                                                  static_cast<double>(n_segments);
    const auto rounded = static_cast<std::uint64_t>(detail::round_half_away(b));
    if (rounded > bounds.back()) bounds.push_back(rounded);
  }
  bounds.push_back(static_cast<std::uint64_t>(mx) + 1);  // include the max

  SegmentedHistogram hist;
  hist.source_min = mn;
  hist.source_max = mx;
  hist.segments.resize(bounds.size() - 1);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i)
    hist.segments[i] = {bounds[i], bounds[i + 1], 0};

  for (std::uint32_t v : image.data) {
    // first segment whose upper bound exceeds v
    const auto it = std::upper_bound(bounds.begin() + 1, bounds.end(),
                                     static_cast<std::uint64_t>(v));
    const auto idx = static_cast<std::size_t>(it - (bounds.begin() + 1));
    ++hist.segments[idx].count;
  }
  hist.validate();
  return hist;
}

/// Step 3: repeatedly merge any segment with fewer than min_count pixels
/// into whichever adjacent neighbor has the smaller count (ties to the
/// left), scanning left to right, until every segment reaches min_count or
/// one segment remains.
inline SegmentedHistogram merge_small_segments(const SegmentedHistogram& hist,
                                               std::uint64_t min_count) {
  if (min_count < 1)
    throw std::invalid_argument("merge_small_segments: min_count must be >= 1");
  hist.validate();
  SegmentedHistogram out = hist;
  auto& segs = out.segments;
  while (segs.size() > 1) {
    std::size_t i = 0;
    while (i < segs.size() && segs[i].count >= min_count) ++i;
    if (i == segs.size()) break;
    std::size_t nb;
    if (i == 0)
      nb = 1;
    else if (i + 1 == segs.size())
      nb = i - 1;
    else
      nb = (segs[i - 1].count <= segs[i + 1].count) ? i - 1 : i + 1;
    const std::size_t lo = std::min(i, nb), hi = std::max(i, nb);
    segs[lo].upper = segs[hi].upper;
    segs[lo].count += segs[hi].count;
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  out.validate();
  return out;
}

enum class DemarcationMode { global_max, tail_max };

struct Demarcation {
  int index = 0;  // 1-based
  GrayRange heterogeneous_range;
  GrayRange background_range;
};

/// Step 4: locate the segment separating heterogeneous-body grays (darker,
/// below) from background grays (brighter, above). tail_max restricts the
/// argmax to the last three fifths of the segments; ties break to the
/// smallest index.
inline Demarcation find_demarcation(const SegmentedHistogram& hist,
                                    DemarcationMode mode) {
  hist.validate();
  const auto& segs = hist.segments;
  const int n = static_cast<int>(segs.size());
  if (n < 2)
    throw std::invalid_argument("find_demarcation: need at least 2 segments");

  const int first = mode == DemarcationMode::tail_max ? (2 * n) / 5 + 1 : 1;
  int best = first;
  for (int i = first; i <= n; ++i)
    if (segs[static_cast<std::size_t>(i - 1)].count >
        segs[static_cast<std::size_t>(best - 1)].count)
      best = i;

  Demarcation d;
  d.index = best;
  const auto& seg = segs[static_cast<std::size_t>(best - 1)];
  d.heterogeneous_range = {hist.source_min, seg.lower};
  d.background_range = {seg.upper, segs.back().upper};
  return d;
}

struct GradientSelection {
  std::uint64_t gradient_threshold = 0;
  GrayRange accurate_range;
  int candidate_index = 0;  // 1-based index of the minimum-count segment
};

/// Step 5: among segments strictly below the demarcation whose lower bound
/// exceeds gray_floor, pick the one with the fewest pixels (ties to the
/// larger lower bound). The accurate heterogeneous range runs from the next
/// segment's lower bound to the lower bound of the segment just below the
/// demarcation; its width is the gradient threshold.
inline GradientSelection select_gradient_threshold(
    const SegmentedHistogram& hist, int demarcation, std::uint64_t gray_floor) {
  hist.validate();
  const auto& segs = hist.segments;
  const int n = static_cast<int>(segs.size());
  if (demarcation < 4 || demarcation > n)
    throw std::invalid_argument(
        "select_gradient_threshold: demarcation index " +
        std::to_string(demarcation) + " leaves no room below (need >= 4)");

  int cand = 0;
  for (int i = 1; i < demarcation; ++i) {
    const auto& s = segs[static_cast<std::size_t>(i - 1)];
    if (s.lower <= gray_floor) continue;
    if (cand == 0 || s.count <= segs[static_cast<std::size_t>(cand - 1)].count)
      cand = i;  // <= keeps the later (larger lower bound) candidate on ties
  }
  if (cand == 0)
    throw std::invalid_argument(
        "select_gradient_threshold: no segment below the demarcation has a "
        "lower bound above the gray floor " +
        std::to_string(gray_floor));

  GradientSelection sel;
  sel.candidate_index = cand;
  const std::uint64_t upper = segs[static_cast<std::size_t>(demarcation - 2)].lower;
  std::uint64_t lower = segs[static_cast<std::size_t>(cand)].lower;  // next segment
  if (lower >= upper) {
    // candidate adjacent to the demarcation: fall back to the single
    // segment ending at the bound
    lower = segs[static_cast<std::size_t>(demarcation - 3)].lower;
  }
  sel.accurate_range = {lower, upper};
  sel.gradient_threshold = sel.accurate_range.width();
  if (sel.gradient_threshold == 0)
    throw std::invalid_argument(
        "select_gradient_threshold: computed range width is zero");
  return sel;
}

struct CompressionResult {
  Raster image;  // levels 1..K, max_value = K
  TerraceMap map;
};

/// Terrace compression: scan the occurring gray values in ascending order;
/// a value closes the current terrace and opens a new one when the terrace
/// already holds pixels and either the accumulated pixel count reached the
/// area threshold or the gray span reached the gradient threshold. Each
/// pixel is replaced by its terrace's level.
inline CompressionResult terrace_compress(const Raster& image,
                                          std::uint64_t area_threshold,
                                          std::uint64_t gradient_threshold) {
  if (area_threshold < 1 || gradient_threshold < 1)
    throw std::invalid_argument("terrace_compress: thresholds must be >= 1");
  const auto values = detail::value_counts(image);

  TerraceMap map;
  std::map<std::uint32_t, std::uint32_t> level_of;
  std::uint64_t acc = 0;  // pixels accumulated in the current terrace
  for (const auto& [gray, count] : values) {
    if (map.terraces.empty()) {
      map.terraces.push_back({gray, gray, 1});
    } else {
      Terrace& cur = map.terraces.back();
      const std::uint64_t span =
          static_cast<std::uint64_t>(gray) - cur.start_gray;
      if (acc >= area_threshold || span >= gradient_threshold) {
        map.terraces.push_back({gray, gray, cur.level + 1});
        acc = 0;
      }
    }
    map.terraces.back().end_gray = gray;
    level_of[gray] = static_cast<std::uint32_t>(map.terraces.back().level);
    acc += count;
  }

  CompressionResult res;
  res.map = std::move(map);
  res.image.width = image.width;
  res.image.height = image.height;
  res.image.max_value = static_cast<std::uint32_t>(res.map.level_count());
  res.image.data.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    res.image.data[i] = level_of[image.data[i]];
  return res;
}

struct AutoCompressConfig {
  int n_segments = 35;
  std::uint64_t gray_floor = 5000;
  DemarcationMode demarcation_mode = DemarcationMode::tail_max;
  double growth_factor = 1.2;
  int level_cap = 255;
  int max_iterations = 64;
};

struct AutoCompressResult {
  Raster image;
  ThresholdSelection selection;
  TerraceMap map;
};

/// Full automated pipeline (Steps 1-6): fix the gradient threshold from the
/// gray distribution, start the area threshold at the requested minimum
/// body area, and grow it geometrically until the compressed level count
/// fits under the cap.
inline AutoCompressResult auto_compress(const Raster& image,
                                        std::uint64_t min_body_area,
                                        const AutoCompressConfig& config = {}) {
  if (min_body_area < 1)
    throw std::invalid_argument("auto_compress: min_body_area must be >= 1");

  const auto segments = build_segments(image, config.n_segments);
  const std::uint64_t min_count = static_cast<std::uint64_t>(
      std::ceil(0.01 * static_cast<double>(segments.source_max)));
  const auto merged = merge_small_segments(segments, std::max<std::uint64_t>(1, min_count));
  const auto demarcation = find_demarcation(merged, config.demarcation_mode);
  const auto gradient =
      select_gradient_threshold(merged, demarcation.index, config.gray_floor);

  AutoCompressResult res;
  res.selection.gradient_threshold = gradient.gradient_threshold;
  res.selection.demarcation_index = demarcation.index;
  res.selection.heterogeneous_range = demarcation.heterogeneous_range;
  res.selection.background_range = demarcation.background_range;
  res.selection.accurate_range = gradient.accurate_range;

  std::uint64_t area = min_body_area;
  for (int iter = 0; iter <= config.max_iterations; ++iter) {
    auto compressed =
        terrace_compress(image, area, gradient.gradient_threshold);
    if (compressed.map.level_count() <= config.level_cap) {
      res.image = std::move(compressed.image);
      res.map = std::move(compressed.map);
      res.selection.area_threshold = area;
      res.selection.iterations = iter;
      res.selection.compressed_max_level = res.map.level_count();
      return res;
    }
    area = static_cast<std::uint64_t>(
        std::ceil(config.growth_factor * static_cast<double>(area)));
  }

  const auto [mn, mx] = value_range(image);
  throw std::runtime_error(
      "auto_compress: no area threshold within " +
      std::to_string(config.max_iterations) + " growth steps brings the level "
      "count under " + std::to_string(config.level_cap) + " (gray span " +
      std::to_string(mx - mn) + ", gradient threshold " +
      std::to_string(gradient.gradient_threshold) + ")");
}

}  // namespace terracomp
