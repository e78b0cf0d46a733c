#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_util.hpp"
#include "vidrec/sampling.hpp"

using namespace vidrec;
using vidrec::testing::random_tensor;

TEST(UniformSample, DocumentedCases) {
  std::vector<std::size_t> id(16);
  std::iota(id.begin(), id.end(), 0);
  EXPECT_EQ(uniform_sample(16, 16), id);
  std::vector<std::size_t> odd;
  for (std::size_t i = 1; i < 32; i += 2) odd.push_back(i);
  EXPECT_EQ(uniform_sample(32, 16), odd);
  const auto s = uniform_sample(5, 16);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()), (std::set<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_THROW(uniform_sample(0, 4), std::invalid_argument);
  EXPECT_THROW(uniform_sample(4, 0), std::invalid_argument);
}

TEST(UniformSample, IndicesInRangeAndNonDecreasing) {
  for (std::size_t L = 1; L <= 60; ++L)
    for (std::size_t n = 1; n <= 20; ++n) {
      const auto s = uniform_sample(L, n);
      ASSERT_EQ(s.size(), n);
      EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
      EXPECT_LT(s.back(), L);
    }
}

TEST(TemporalJitter, IdentityWhenSegmentsAreSingleFrames) {
  std::vector<std::size_t> id(9);
  std::iota(id.begin(), id.end(), 0);
  EXPECT_EQ(temporal_jitter(9, 9, 123u), id);
}

TEST(TemporalJitter, SegmentMembershipAndReproducibility) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(1, 80), cnt(1, 20);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t L = len(rng), n = cnt(rng);
    const auto s = temporal_jitter(L, n, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(s, temporal_jitter(L, n, static_cast<std::uint64_t>(trial)));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i * L / n, hi = (i + 1) * L / n;
      if (hi > lo) {
        EXPECT_GE(s[i], lo);
        EXPECT_LT(s[i], hi);
      } else {
        EXPECT_EQ(s[i], std::min(lo, L - 1));
      }
    }
  }
}

TEST(TemporalJitter, UniformWithinSegmentsChiSquare) {
  // L = 37, n = 8: segment sizes 4,5,4,5,5,4,5,5, so 29 degrees of freedom in
  // total. chi^2 quantile at 0.99 for 29 dof.
  const std::size_t L = 37, n = 8, draws = 100000;
  const double critical = 49.588;
  std::mt19937_64 rng(2);
  std::vector<std::size_t> counts(L, 0);
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t idx : temporal_jitter(L, n, rng)) ++counts[idx];
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i * L / n, hi = (i + 1) * L / n;
    const double expected = double(draws) / double(hi - lo);
    for (std::size_t f = lo; f < hi; ++f) chi2 += (counts[f] - expected) * (counts[f] - expected) / expected;
  }
  EXPECT_LT(chi2, critical);
}

TEST(ThreeCrops, SquareLandscapeAndPortrait) {
  std::mt19937_64 rng(3);
  const Tensor sq = random_tensor({3, 8, 8}, rng);
  const auto s = three_crops(sq, 8);
  EXPECT_EQ(s[0], sq);
  EXPECT_EQ(s[1], sq);
  EXPECT_EQ(s[2], sq);

  const std::size_t side = 4;
  const Tensor land = random_tensor({2, side, 2 * side}, rng);
  const auto l = three_crops(land, side);
  const std::size_t offsets[3] = {0, side / 2, side};
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) EXPECT_EQ(l[k].at({c, y, x}), land.at({c, y, x + offsets[k]}));

  const Tensor port = random_tensor({1, 10, 6}, rng);
  const auto p = three_crops(port, 6);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) {
      EXPECT_EQ(p[0].at({0, y, x}), port.at({0, y, x}));
      EXPECT_EQ(p[1].at({0, y, x}), port.at({0, y + 2, x}));
      EXPECT_EQ(p[2].at({0, y, x}), port.at({0, y + 4, x}));
    }
}

TEST(ThreeCrops, ShortSideResizedFirst) {
  const Tensor big({3, 16, 24}, 2.5);
  const auto c = three_crops(big, 8);
  for (const Tensor& t : c) {
    EXPECT_EQ(t.shape(), (Shape{3, 8, 8}));
    for (double v : t.data()) EXPECT_NEAR(v, 2.5, 1e-12);
  }
}

TEST(GenerateViews, CountShapeAndHalfSplit) {
  std::mt19937_64 rng(4);
  Tensor frames({32, 1, 4, 4});
  for (std::size_t t = 0; t < 32; ++t)
    for (std::size_t i = 0; i < 16; ++i) frames[t * 16 + i] = double(t);
  const Video v{"v", frames};
  const ViewSpec spec{2, 3, 4};
  const auto views = generate_views(v, spec, SamplingSpec{16});
  ASSERT_EQ(views.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(views[i].shape(), (Shape{16, 1, 4, 4}));
    for (std::size_t t = 0; t < 16; ++t) {
      const double src = views[i].at({t, 0, 0, 0});
      if (i < 3) {
        EXPECT_LT(src, 16.0);
      } else {
        EXPECT_GE(src, 16.0);
      }
    }
  }
  EXPECT_EQ(clip_window(32, 0, 2), (std::pair<std::size_t, std::size_t>{0, 16}));
  EXPECT_EQ(clip_window(32, 1, 2), (std::pair<std::size_t, std::size_t>{16, 32}));
}

TEST(GenerateViews, ConstantSquareVideoGivesIdenticalViews) {
  const Video v{"c", Tensor({20, 3, 8, 8}, 0.75)};
  const auto views = generate_views(v, ViewSpec{2, 3, 8}, SamplingSpec{16});
  for (const Tensor& t : views) EXPECT_EQ(t, views[0]);
}

TEST(AggregateViews, CountCheckedAndOrderFree) {
  std::mt19937_64 rng(5);
  const ViewSpec spec{2, 3, 8};
  std::vector<PredictionScores> s;
  for (int i = 0; i < 6; ++i) s.push_back({random_tensor({3}, rng), random_tensor({4}, rng), random_tensor({5}, rng)});
  const PredictionScores ref = aggregate_views(s, spec);
  std::reverse(s.begin(), s.end());
  EXPECT_EQ(aggregate_views(s, spec).action, ref.action);
  s.pop_back();
  EXPECT_THROW(aggregate_views(s, spec), std::invalid_argument);
  const std::vector<PredictionScores> same(6, s[0]);
  EXPECT_LE(max_abs_diff(aggregate_views(same, spec).noun, softmax_scores(s[0]).noun), 1e-15);
}
