#include "terracomp/raster.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "terracomp/rng.hpp"

using namespace terracomp;

namespace {

Raster random_raster(Rng& rng, int w, int h, std::uint32_t maxv) {
  Raster r(w, h, maxv);
  for (auto& v : r.data) v = static_cast<std::uint32_t>(rng.next_below(maxv + 1ull));
  return r;
}

}  // namespace

TEST(Accumulate, ConstantFrames) {
  FrameStack stack;
  for (int i = 0; i < 700; ++i) stack.frames.push_back(Raster(2, 2, 3, 3));
  const Raster sum = accumulate_frames(stack);
  for (auto v : sum.data) EXPECT_EQ(v, 2100u);
  EXPECT_EQ(sum.max_value, 2100u);
}

TEST(Accumulate, SingleFrameIdentity) {
  Rng rng(1);
  FrameStack stack;
  stack.frames.push_back(random_raster(rng, 5, 3, 100));
  const Raster sum = accumulate_frames(stack);
  EXPECT_EQ(sum.data, stack.frames[0].data);
}

TEST(Accumulate, MatchesDoubleLoopOracle) {
  Rng rng(42);
  FrameStack stack;
  for (int f = 0; f < 10; ++f) stack.frames.push_back(random_raster(rng, 4, 4, 4095));

  // independent brute-force oracle
  std::vector<std::uint64_t> expect(16, 0);
  for (int f = 0; f < 10; ++f)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        expect[static_cast<std::size_t>(y) * 4 + x] += stack.frames[f].at(x, y);

  const Raster sum = accumulate_frames(stack);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(sum.data[i], expect[i]);
}

TEST(Accumulate, Linearity) {
  Rng rng(7);
  FrameStack a, b, both;
  for (int f = 0; f < 4; ++f) a.frames.push_back(random_raster(rng, 3, 3, 1000));
  for (int f = 0; f < 5; ++f) b.frames.push_back(random_raster(rng, 3, 3, 1000));
  both.frames = a.frames;
  both.frames.insert(both.frames.end(), b.frames.begin(), b.frames.end());

  const Raster sa = accumulate_frames(a), sb = accumulate_frames(b);
  const Raster sboth = accumulate_frames(both);
  for (std::size_t i = 0; i < sboth.size(); ++i)
    EXPECT_EQ(sboth.data[i], sa.data[i] + sb.data[i]);
}

TEST(Accumulate, Errors) {
  FrameStack empty;
  EXPECT_THROW(accumulate_frames(empty), std::invalid_argument);

  FrameStack mismatched;
  mismatched.frames.push_back(Raster(2, 2, 1));
  mismatched.frames.push_back(Raster(3, 2, 1));
  EXPECT_THROW(accumulate_frames(mismatched), std::invalid_argument);

  // two frames at the 32-bit ceiling overflow exactly one pixel
  FrameStack big;
  Raster top(2, 1, 0xffffffffu);
  top.at(1, 0) = 0xffffffffu;
  big.frames.push_back(top);
  big.frames.push_back(top);
  try {
    accumulate_frames(big);
    FAIL() << "expected overflow";
  } catch (const std::overflow_error& e) {
    EXPECT_NE(std::string(e.what()).find("(1,0)"), std::string::npos);
  }
}

TEST(MedianFilter, ConstantIsFixedPoint) {
  const Raster img(7, 7, 50, 50);
  EXPECT_EQ(median_filter(img, 5), img);
}

TEST(MedianFilter, IsolatedSpikeRemoved) {
  // hand-traced: every 3x3 neighborhood of the center spike holds at most
  // one 100 among nine samples, so each median is 0
  Raster img(5, 5, 100, 0);
  img.at(2, 2) = 100;
  const Raster out = median_filter(img, 3);
  for (auto v : out.data) EXPECT_EQ(v, 0u);
  EXPECT_EQ(out.max_value, 100u);
}

TEST(MedianFilter, WindowOneIsIdentity) {
  Rng rng(3);
  const Raster img = random_raster(rng, 6, 4, 500);
  EXPECT_EQ(median_filter(img, 1), img);
}

TEST(MedianFilter, Errors) {
  const Raster img(4, 4, 10, 1);
  EXPECT_THROW(median_filter(img, 2), std::invalid_argument);
  EXPECT_THROW(median_filter(img, 0), std::invalid_argument);
  EXPECT_THROW(median_filter(img, -3), std::invalid_argument);
  EXPECT_THROW(median_filter(img, 5), std::invalid_argument);  // window > dims
}

TEST(MedianFilter, OutputBoundedByNeighborhood) {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Raster img = random_raster(rng, 9, 8, 64);
    const std::set<std::uint32_t> values(img.data.begin(), img.data.end());
    const Raster out = median_filter(img, 3);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        std::uint32_t lo = 0xffffffffu, hi = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = std::clamp(x + dx, 0, img.width - 1);
            const int yy = std::clamp(y + dy, 0, img.height - 1);
            lo = std::min(lo, img.at(xx, yy));
            hi = std::max(hi, img.at(xx, yy));
          }
        EXPECT_GE(out.at(x, y), lo);
        EXPECT_LE(out.at(x, y), hi);
        EXPECT_TRUE(values.count(out.at(x, y)));
      }
  }
}

TEST(Raster, ValidateCatchesViolations) {
  Raster bad(2, 2, 5);
  bad.data[3] = 6;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad.data[3] = 5;
  EXPECT_NO_THROW(bad.validate());
  bad.data.pop_back();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(MultiChannel, ValidatesWavelengthOrderAndShape) {
  MultiChannelImage img;
  img.channels.push_back({450, Raster(2, 2, 1, 0)});
  img.channels.push_back({410, Raster(2, 2, 1, 0)});
  EXPECT_THROW(img.validate(), std::invalid_argument);

  img.channels[1].wavelength_nm = 500;
  EXPECT_NO_THROW(img.validate());

  img.channels[1].image = Raster(3, 2, 1, 0);
  EXPECT_THROW(img.validate(), std::invalid_argument);
}
