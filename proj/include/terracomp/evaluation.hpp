#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "terracomp/raster.hpp"

namespace terracomp {

/// Row-major boolean mask; true marks heterogeneous-body foreground.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h)
      : width(w), height(h),
        bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::uint64_t popcount() const {
    std::uint64_t c = 0;
    for (auto b : bits) c += b != 0;
    return c;
  }
  bool same_shape(const BinaryMask& o) const {
    return width == o.width && height == o.height;
  }
};

struct BoundingBox {
  int x0 = 0, y0 = 0;  // inclusive
  int x1 = 0, y1 = 0;  // inclusive
};

struct Body {
  int id = 0;  // 1-based, row-major by centroid
  BoundingBox box;
  BinaryMask component;  // full-size mask of this body only
  double centroid_x = 0.0, centroid_y = 0.0;
};

struct BodyTemplate {
  BinaryMask mask;
  std::vector<Body> bodies;
};

/// Otsu threshold: maximizes between-class variance over the occurring gray
/// values; foreground is values <= threshold (bodies absorb more and appear
/// darker).
inline std::uint32_t otsu_threshold(const Raster& image) {
  std::map<std::uint32_t, std::uint64_t> hist;
  for (std::uint32_t v : image.data) ++hist[v];
  if (hist.size() < 2)
    throw std::invalid_argument("otsu_threshold: constant image");

  const auto total = static_cast<double>(image.size());
  double total_sum = 0.0;
  for (const auto& [v, c] : hist)
    total_sum += static_cast<double>(v) * static_cast<double>(c);

  double best_var = -1.0;
  std::uint32_t best_t = hist.begin()->first;
  double w0 = 0.0, sum0 = 0.0;
  for (const auto& [v, c] : hist) {
    w0 += static_cast<double>(c);
    sum0 += static_cast<double>(v) * static_cast<double>(c);
    const double w1 = total - w0;
    if (w1 <= 0.0) break;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_sum - sum0) / w1;
    const double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = v;
    }
  }
  return best_t;
}

inline BinaryMask binarize_fixed(const Raster& image, std::uint32_t threshold) {
  BinaryMask m(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i)
    m.bits[i] = image.data[i] <= threshold ? 1 : 0;
  return m;
}

inline BinaryMask binarize_otsu(const Raster& image) {
  return binarize_fixed(image, otsu_threshold(image));
}

/// 4-connected component labeling; bodies are numbered row-major by
/// centroid (top to bottom, then left to right).
inline BodyTemplate extract_bodies(const BinaryMask& mask) {
  const int w = mask.width, h = mask.height;
  std::vector<int> comp(static_cast<std::size_t>(w) * h, -1);
  int n_comp = 0;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!mask.bits[i] || comp[i] >= 0) continue;
      const int c = n_comp++;
      comp[i] = c;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
          if (mask.bits[ni] && comp[ni] < 0) {
            comp[ni] = c;
            queue.emplace_back(nx, ny);
          }
        }
      }
    }
  }
  if (n_comp == 0)
    throw std::invalid_argument("extract_bodies: empty mask");

  std::vector<Body> bodies(static_cast<std::size_t>(n_comp));
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(n_comp), 0);
  for (auto& b : bodies) {
    b.component = BinaryMask(w, h);
    b.box = {w, h, -1, -1};
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int c = comp[static_cast<std::size_t>(y) * w + x];
      if (c < 0) continue;
      auto& b = bodies[static_cast<std::size_t>(c)];
      b.component.set(x, y, true);
      b.box.x0 = std::min(b.box.x0, x);
      b.box.y0 = std::min(b.box.y0, y);
      b.box.x1 = std::max(b.box.x1, x);
      b.box.y1 = std::max(b.box.y1, y);
      b.centroid_x += x;
      b.centroid_y += y;
      ++counts[static_cast<std::size_t>(c)];
    }
  }
  for (int c = 0; c < n_comp; ++c) {
    bodies[static_cast<std::size_t>(c)].centroid_x /=
        static_cast<double>(counts[static_cast<std::size_t>(c)]);
    bodies[static_cast<std::size_t>(c)].centroid_y /=
        static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  std::sort(bodies.begin(), bodies.end(), [](const Body& a, const Body& b) {
    if (a.centroid_y != b.centroid_y) return a.centroid_y < b.centroid_y;
    return a.centroid_x < b.centroid_x;
  });
  for (std::size_t i = 0; i < bodies.size(); ++i)
    bodies[i].id = static_cast<int>(i) + 1;

  BodyTemplate tmpl;
  tmpl.mask = mask;
  tmpl.bodies = std::move(bodies);
  return tmpl;
}

/// Dice coefficient 2|A n B| / (|A| + |B|); two empty masks count as
/// identical (1).
inline double dice(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("dice: dimension mismatch");
  std::uint64_t inter = 0, total = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] && b.bits[i]) ? 1 : 0;
    total += (a.bits[i] ? 1 : 0) + (b.bits[i] ? 1 : 0);
  }
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

struct DiceReport {
  std::string method;
  std::vector<double> per_body;  // index 0 = body 1
  double overall_average = 0.0;
  std::vector<int> subset_ids;
  double subset_average = 0.0;
};

enum class ForegroundPolicy { best_match, darkest_mean };

struct EvaluateOptions {
  int roi_pad = 5;
  std::vector<int> subset_ids = {9, 10, 11, 12, 13, 14, 15, 16};
  ForegroundPolicy policy = ForegroundPolicy::best_match;
  const Raster* reference = nullptr;  // intensity image for darkest_mean
  std::string method_name = "method";
};

/// Scores a label image against the body template: per body, the predicted
/// foreground within the padded bounding box is the single cluster label
/// maximizing Dice (or the globally darkest-mean label when that policy is
/// selected).
inline DiceReport evaluate(const Raster& labels, const BodyTemplate& tmpl,
                           const EvaluateOptions& opts = {}) {
  if (labels.width != tmpl.mask.width || labels.height != tmpl.mask.height)
    throw std::invalid_argument(
        "evaluate: label image and template dimensions differ (" +
        std::to_string(labels.width) + "x" + std::to_string(labels.height) +
        " vs " + std::to_string(tmpl.mask.width) + "x" +
        std::to_string(tmpl.mask.height) + ")");

  if (labels.max_value > 65535)
    throw std::invalid_argument(
        "evaluate: label image declares " + std::to_string(labels.max_value) +
        " as its ceiling; cluster indices are expected to be small");
  const std::uint32_t n_labels = labels.max_value + 1;
  int fixed_label = -1;
  if (opts.policy == ForegroundPolicy::darkest_mean) {
    if (opts.reference == nullptr || !labels.same_shape(*opts.reference))
      throw std::invalid_argument(
          "evaluate: darkest_mean policy needs a reference image of matching size");
    std::vector<double> sum(n_labels, 0.0);
    std::vector<std::uint64_t> cnt(n_labels, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      sum[labels.data[i]] += static_cast<double>(opts.reference->data[i]);
      ++cnt[labels.data[i]];
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t l = 0; l < n_labels; ++l) {
      if (cnt[l] == 0) continue;
      const double mean = sum[l] / static_cast<double>(cnt[l]);
      if (mean < best) {
        best = mean;
        fixed_label = static_cast<int>(l);
      }
    }
  }

  DiceReport report;
  report.method = opts.method_name;
  report.subset_ids = opts.subset_ids;
  for (const Body& body : tmpl.bodies) {
    const int x0 = std::max(0, body.box.x0 - opts.roi_pad);
    const int y0 = std::max(0, body.box.y0 - opts.roi_pad);
    const int x1 = std::min(labels.width - 1, body.box.x1 + opts.roi_pad);
    const int y1 = std::min(labels.height - 1, body.box.y1 + opts.roi_pad);
    const int rw = x1 - x0 + 1, rh = y1 - y0 + 1;

    BinaryMask truth(rw, rh);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        truth.set(x - x0, y - y0, body.component.at(x, y));

    double body_dice = 0.0;
    auto dice_for = [&](std::uint32_t l) {
      BinaryMask pred(rw, rh);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
          pred.set(x - x0, y - y0, labels.at(x, y) == l);
      return dice(pred, truth);
    };
    if (fixed_label >= 0) {
      body_dice = dice_for(static_cast<std::uint32_t>(fixed_label));
    } else {
      for (std::uint32_t l = 0; l < n_labels; ++l)
        body_dice = std::max(body_dice, dice_for(l));
    }
    report.per_body.push_back(body_dice);
  }

  double total = 0.0;
  for (double v : report.per_body) total += v;
  report.overall_average =
      report.per_body.empty() ? 0.0 : total / static_cast<double>(report.per_body.size());

  double sub = 0.0;
  std::size_t sub_n = 0;
  for (int id : opts.subset_ids) {
    if (id >= 1 && static_cast<std::size_t>(id) <= report.per_body.size()) {
      sub += report.per_body[static_cast<std::size_t>(id) - 1];
      ++sub_n;
    }
  }
  report.subset_average = sub_n ? sub / static_cast<double>(sub_n) : 0.0;
  return report;
}

/// Body-id graymap (0 = background, 1..n = body ids) from a template, and
/// the inverse. This is the on-disk truth format.
inline Raster id_map_from_template(const BodyTemplate& tmpl) {
  Raster out(tmpl.mask.width, tmpl.mask.height,
             static_cast<std::uint32_t>(tmpl.bodies.size()));
  for (const Body& b : tmpl.bodies)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        if (b.component.at(x, y))
          out.at(x, y) = static_cast<std::uint32_t>(b.id);
  return out;
}

inline BodyTemplate template_from_id_map(const Raster& ids) {
  std::uint32_t max_id = 0;
  for (std::uint32_t v : ids.data) max_id = std::max(max_id, v);
  if (max_id == 0)
    throw std::invalid_argument("template_from_id_map: no body ids present");

  BodyTemplate tmpl;
  tmpl.mask = BinaryMask(ids.width, ids.height);
  tmpl.bodies.resize(max_id);
  std::vector<std::uint64_t> counts(max_id, 0);
  for (std::uint32_t b = 0; b < max_id; ++b) {
    tmpl.bodies[b].id = static_cast<int>(b) + 1;
    tmpl.bodies[b].component = BinaryMask(ids.width, ids.height);
    tmpl.bodies[b].box = {ids.width, ids.height, -1, -1};
  }
  for (int y = 0; y < ids.height; ++y) {
    for (int x = 0; x < ids.width; ++x) {
      const std::uint32_t v = ids.at(x, y);
      if (v == 0) continue;
      tmpl.mask.set(x, y, true);
      auto& b = tmpl.bodies[v - 1];
      b.component.set(x, y, true);
      b.box.x0 = std::min(b.box.x0, x);
      b.box.y0 = std::min(b.box.y0, y);
      b.box.x1 = std::max(b.box.x1, x);
      b.box.y1 = std::max(b.box.y1, y);
      b.centroid_x += x;
      b.centroid_y += y;
      ++counts[v - 1];
    }
  }
  for (std::uint32_t b = 0; b < max_id; ++b) {
    if (counts[b] == 0)
      throw std::invalid_argument("template_from_id_map: body id " +
                                  std::to_string(b + 1) + " has no pixels");
    tmpl.bodies[b].centroid_x /= static_cast<double>(counts[b]);
    tmpl.bodies[b].centroid_y /= static_cast<double>(counts[b]);
  }
  return tmpl;
}

}  // namespace terracomp
