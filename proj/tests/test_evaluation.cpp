#include "terracomp/evaluation.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "terracomp/rng.hpp"

using namespace terracomp;

namespace {

BinaryMask mask_from(const std::vector<std::string>& rows) {
  BinaryMask m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      m.set(x, y, rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '#');
  return m;
}

}  // namespace

TEST(Otsu, SeparatesBimodalImage) {
  Raster img(10, 10, 255);
  for (std::size_t i = 0; i < 50; ++i) img.data[i] = 10;
  for (std::size_t i = 50; i < 100; ++i) img.data[i] = 200;

  // exhaustive oracle over every occurring threshold value
  const std::set<std::uint32_t> values(img.data.begin(), img.data.end());
  double best_var = -1.0;
  std::uint32_t best_t = 0;
  for (std::uint32_t t : values) {
    double w0 = 0, w1 = 0, s0 = 0, s1 = 0;
    for (auto v : img.data)
      if (v <= t) {
        w0 += 1;
        s0 += v;
      } else {
        w1 += 1;
        s1 += v;
      }
    if (w0 == 0 || w1 == 0) continue;
    const double mu0 = s0 / w0, mu1 = s1 / w1;
    const double var = (w0 / 100.0) * (w1 / 100.0) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  EXPECT_EQ(otsu_threshold(img), best_t);

  const BinaryMask fg = binarize_otsu(img);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_TRUE(fg.bits[i]);   // the dark mode
  for (std::size_t i = 50; i < 100; ++i) EXPECT_FALSE(fg.bits[i]);
}

TEST(Otsu, MatchesOracleOnRandomImages) {
  Rng rng(19);
  for (int trial = 0; trial < 25; ++trial) {
    Raster img(12, 9, 64);
    for (auto& v : img.data) v = static_cast<std::uint32_t>(rng.next_below(65));
    const std::set<std::uint32_t> values(img.data.begin(), img.data.end());
    if (values.size() < 2) continue;

    double best_var = -1.0;
    std::uint32_t best_t = 0;
    const double total = static_cast<double>(img.size());
    for (std::uint32_t t : values) {
      double w0 = 0, s0 = 0, w1 = 0, s1 = 0;
      for (auto v : img.data)
        if (v <= t) {
          w0 += 1;
          s0 += v;
        } else {
          w1 += 1;
          s1 += v;
        }
      if (w1 == 0) continue;
      const double var =
          (w0 / total) * (w1 / total) * (s0 / w0 - s1 / w1) * (s0 / w0 - s1 / w1);
      if (var > best_var) {
        best_var = var;
        best_t = t;
      }
    }
    EXPECT_EQ(otsu_threshold(img), best_t);
  }
}

TEST(Otsu, ConstantImageRejected) {
  const Raster img(4, 4, 7, 7);
  EXPECT_THROW(otsu_threshold(img), std::invalid_argument);
}

TEST(BinarizeFixed, BoundaryBehaviors) {
  Raster img(2, 2, 50);
  img.data = {1, 20, 30, 50};
  EXPECT_EQ(binarize_fixed(img, 0).popcount(), 0u);   // all positive
  EXPECT_EQ(binarize_fixed(img, 50).popcount(), 4u);  // threshold at max
  EXPECT_EQ(binarize_fixed(img, 25).popcount(), 2u);
}

TEST(ExtractBodies, GridNumberedRowMajor) {
  BinaryMask mask(40, 40);
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 4; ++col)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
          mask.set(col * 10 + 2 + x, row * 10 + 2 + y, true);
  const auto tmpl = extract_bodies(mask);
  ASSERT_EQ(tmpl.bodies.size(), 16u);
  for (int i = 0; i < 16; ++i) {
    const auto& b = tmpl.bodies[static_cast<std::size_t>(i)];
    EXPECT_EQ(b.id, i + 1);
    EXPECT_EQ(b.box.x0, (i % 4) * 10 + 2);
    EXPECT_EQ(b.box.y0, (i / 4) * 10 + 2);
    EXPECT_EQ(b.component.popcount(), 16u);
  }
}

TEST(ExtractBodies, SingleBlob) {
  const auto tmpl = extract_bodies(mask_from({"....", ".##.", ".##.", "...."}));
  ASSERT_EQ(tmpl.bodies.size(), 1u);
  EXPECT_EQ(tmpl.bodies[0].id, 1);
  EXPECT_EQ(tmpl.bodies[0].component.popcount(), 4u);
}

TEST(ExtractBodies, FourConnectivityNoDiagonalBridge) {
  const auto tmpl = extract_bodies(mask_from({"#.", ".#"}));
  EXPECT_EQ(tmpl.bodies.size(), 2u);
}

TEST(ExtractBodies, MatchesFloodFillOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryMask mask(18, 14);
    for (auto& b : mask.bits) b = rng.next_below(100) < 35 ? 1 : 0;
    if (mask.popcount() == 0) mask.set(0, 0, true);

    // independent recursive flood fill
    std::vector<int> comp(mask.bits.size(), -1);
    int n = 0;
    std::function<void(int, int, int)> fill = [&](int x, int y, int c) {
      if (x < 0 || y < 0 || x >= mask.width || y >= mask.height) return;
      const std::size_t i = static_cast<std::size_t>(y) * mask.width + x;
      if (!mask.bits[i] || comp[i] >= 0) return;
      comp[i] = c;
      fill(x + 1, y, c);
      fill(x - 1, y, c);
      fill(x, y + 1, c);
      fill(x, y - 1, c);
    };
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * mask.width + x;
        if (mask.bits[i] && comp[i] < 0) fill(x, y, n++);
      }

    const auto tmpl = extract_bodies(mask);
    EXPECT_EQ(tmpl.bodies.size(), static_cast<std::size_t>(n));

    // same partition: every oracle component equals exactly one body mask
    for (int c = 0; c < n; ++c) {
      BinaryMask want(mask.width, mask.height);
      for (std::size_t i = 0; i < comp.size(); ++i)
        want.bits[i] = comp[i] == c ? 1 : 0;
      bool found = false;
      for (const auto& b : tmpl.bodies)
        if (b.component.bits == want.bits) found = true;
      EXPECT_TRUE(found) << "oracle component " << c;
    }
  }
}

TEST(ExtractBodies, EmptyMaskRejected) {
  EXPECT_THROW(extract_bodies(BinaryMask(4, 4)), std::invalid_argument);
}

TEST(Dice, Axioms) {
  const auto a = mask_from({"##..", "##..", "....", "...."});
  const auto b = mask_from({"..##", "..##", "....", "...."});
  EXPECT_DOUBLE_EQ(dice(a, a), 1.0);  // identical non-empty
  EXPECT_DOUBLE_EQ(dice(a, b), 0.0);  // disjoint non-empty
  EXPECT_DOUBLE_EQ(dice(a, b), dice(b, a));

  // |A| = 2, B subset of A with |B| = 1 -> 2*1/(2+1)
  const auto two = mask_from({"##"});
  const auto one = mask_from({"#."});
  EXPECT_DOUBLE_EQ(dice(two, one), 2.0 / 3.0);

  EXPECT_DOUBLE_EQ(dice(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);  // both empty
  EXPECT_THROW(dice(a, BinaryMask(3, 3)), std::invalid_argument);
}

TEST(Dice, SymmetricBoundedOnRandomMasks) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask a(8, 8), b(8, 8);
    for (auto& v : a.bits) v = rng.next_below(2) ? 1 : 0;
    for (auto& v : b.bits) v = rng.next_below(2) ? 1 : 0;
    const double d = dice(a, b);
    EXPECT_DOUBLE_EQ(d, dice(b, a));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    if (d == 1.0 && a.popcount() > 0) {
      EXPECT_EQ(a.bits, b.bits);
    }
  }
}

namespace {

BodyTemplate grid_template() {
  BinaryMask mask(40, 40);
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 4; ++col)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
          mask.set(col * 10 + 3 + x, row * 10 + 3 + y, true);
  return extract_bodies(mask);
}

}  // namespace

TEST(Evaluate, TemplateDerivedLabelsScorePerfectly) {
  const auto tmpl = grid_template();
  Raster labels(40, 40, 1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels.data[i] = tmpl.mask.bits[i] ? 1 : 0;
  EvaluateOptions opts;
  opts.subset_ids = {9, 10, 11, 12, 13, 14, 15, 16};
  const auto report = evaluate(labels, tmpl, opts);
  ASSERT_EQ(report.per_body.size(), 16u);
  for (double d : report.per_body) EXPECT_DOUBLE_EQ(d, 1.0);
  EXPECT_DOUBLE_EQ(report.overall_average, 1.0);
  EXPECT_DOUBLE_EQ(report.subset_average, 1.0);
}

TEST(Evaluate, UniformLabelsClosedForm) {
  const auto tmpl = grid_template();
  const Raster labels(40, 40, 1, 0);  // a single cluster everywhere
  EvaluateOptions opts;
  opts.roi_pad = 2;
  const auto report = evaluate(labels, tmpl, opts);
  // predicted mask fills the ROI: dice = 2|C| / (|C| + |ROI|)
  for (std::size_t b = 0; b < 16; ++b) {
    const auto& body = tmpl.bodies[b];
    const double c = static_cast<double>(body.component.popcount());
    const double roi = (4 + 2 * opts.roi_pad) * (4 + 2 * opts.roi_pad);
    EXPECT_NEAR(report.per_body[b], 2.0 * c / (c + roi), 1e-12);
  }
}

TEST(Evaluate, InvariantUnderLabelPermutation) {
  const auto tmpl = grid_template();
  Rng rng(31);
  Raster labels(40, 40, 3);
  for (auto& v : labels.data) v = static_cast<std::uint32_t>(rng.next_below(4));
  const auto base = evaluate(labels, tmpl);

  // permute label indices 0123 -> 2031
  const std::uint32_t perm[4] = {2, 0, 3, 1};
  Raster permuted = labels;
  for (auto& v : permuted.data) v = perm[v];
  const auto after = evaluate(permuted, tmpl);
  for (std::size_t b = 0; b < 16; ++b)
    EXPECT_DOUBLE_EQ(base.per_body[b], after.per_body[b]);
  EXPECT_DOUBLE_EQ(base.overall_average, after.overall_average);
}

TEST(Evaluate, AveragesRecomputeFromEntries) {
  const auto tmpl = grid_template();
  Rng rng(37);
  Raster labels(40, 40, 2);
  for (auto& v : labels.data) v = static_cast<std::uint32_t>(rng.next_below(3));
  EvaluateOptions opts;
  opts.subset_ids = {9, 10, 11, 12, 13, 14, 15, 16};
  const auto report = evaluate(labels, tmpl, opts);

  double sum = 0.0;
  for (double d : report.per_body) sum += d;
  EXPECT_NEAR(report.overall_average, sum / 16.0, 1e-12);
  double sub = 0.0;
  for (int id : opts.subset_ids) sub += report.per_body[static_cast<std::size_t>(id - 1)];
  EXPECT_NEAR(report.subset_average, sub / 8.0, 1e-12);
}

TEST(Evaluate, DimensionMismatchRejected) {
  const auto tmpl = grid_template();
  const Raster labels(30, 40, 1, 0);
  EXPECT_THROW(evaluate(labels, tmpl), std::invalid_argument);
}

TEST(Evaluate, DarkestMeanPolicy) {
  const auto tmpl = grid_template();
  Raster labels(40, 40, 1);
  Raster reference(40, 40, 100);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels.data[i] = tmpl.mask.bits[i] ? 1 : 0;
    reference.data[i] = tmpl.mask.bits[i] ? 10 : 90;  // bodies darker
  }
  EvaluateOptions opts;
  opts.policy = ForegroundPolicy::darkest_mean;
  opts.reference = &reference;
  const auto report = evaluate(labels, tmpl, opts);
  for (double d : report.per_body) EXPECT_DOUBLE_EQ(d, 1.0);

  opts.reference = nullptr;
  EXPECT_THROW(evaluate(labels, tmpl, opts), std::invalid_argument);
}

TEST(IdMap, RoundTripsThroughTemplate) {
  const auto tmpl = grid_template();
  const Raster ids = id_map_from_template(tmpl);
  EXPECT_EQ(ids.max_value, 16u);
  const auto back = template_from_id_map(ids);
  ASSERT_EQ(back.bodies.size(), tmpl.bodies.size());
  for (std::size_t b = 0; b < tmpl.bodies.size(); ++b) {
    EXPECT_EQ(back.bodies[b].id, tmpl.bodies[b].id);
    EXPECT_EQ(back.bodies[b].component.bits, tmpl.bodies[b].component.bits);
    EXPECT_EQ(back.bodies[b].box.x0, tmpl.bodies[b].box.x0);
  }
}
