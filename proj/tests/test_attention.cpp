#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_util.hpp"
#include "vidrec/attention.hpp"

using namespace vidrec;
using vidrec::testing::random_tensor;

namespace {

TokenField random_field(std::size_t H, std::size_t T, std::size_t S, std::size_t d, std::mt19937_64& rng) {
  const Shape s{H, T, S, d};
  return TokenField(random_tensor(s, rng), random_tensor(s, rng), random_tensor(s, rng));
}

// Independent per-frame attention: softmax(q k^T / sqrt(d)) v with explicit loops.
Tensor per_frame_oracle(const TokenField& f) {
  const std::size_t H = f.heads(), T = f.frames(), S = f.tokens(), D = f.head_dim();
  Tensor y({H, T, S, D});
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t s = 0; s < S; ++s) {
        std::vector<double> w(S);
        double mx = -INFINITY;
        for (std::size_t j = 0; j < S; ++j) {
          double dot = 0.0;
          for (std::size_t c = 0; c < D; ++c) dot += f.q.at({h, t, s, c}) * f.k.at({h, t, j, c});
          w[j] = dot / std::sqrt(double(D));
          mx = std::max(mx, w[j]);
        }
        double z = 0.0;
        for (double& x : w) z += (x = std::exp(x - mx));
        for (std::size_t c = 0; c < D; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < S; ++j) acc += w[j] / z * f.v.at({h, t, j, c});
          y.at({h, t, s, c}) = acc;
        }
      }
  return y;
}

}  // namespace

TEST(ChannelPlan, DocumentedPartitions) {
  const ChannelPlan p = ChannelPlan::build(6, 1);
  EXPECT_EQ(p.block(-1), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(p.block(0), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(p.block(1), (std::vector<std::size_t>{4, 5}));
  const ChannelPlan z = ChannelPlan::build(5, 0);
  EXPECT_EQ(z.block(0), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  const ChannelPlan h = ChannelPlan::build(64, 1);
  EXPECT_EQ(h.block(-1).size(), 21u);
  EXPECT_EQ(h.block(0).size(), 22u);
  EXPECT_EQ(h.block(1).size(), 21u);
}

TEST(ChannelPlan, RejectsTooFewChannels) {
  EXPECT_THROW(ChannelPlan::build(4, 2), std::invalid_argument);
  EXPECT_THROW(ChannelPlan::build(2, 1), std::invalid_argument);
  EXPECT_NO_THROW(ChannelPlan::build(3, 1));
}

TEST(ChannelPlan, BlocksPartitionAndSerializeRoundTrip) {
  for (std::size_t d = 1; d <= 70; ++d) {
    for (int t_w = 0; 2 * t_w + 1 <= static_cast<int>(d) && t_w <= 4; ++t_w) {
      const ChannelPlan p = ChannelPlan::build(d, t_w);
      std::vector<std::size_t> all;
      for (int o = -t_w; o <= t_w; ++o) {
        const auto& b = p.block(o);
        EXPECT_TRUE(std::is_sorted(b.begin(), b.end()));
        for (std::size_t c : b) EXPECT_EQ(p.offset_of(c), o);
        all.insert(all.end(), b.begin(), b.end());
      }
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expect(d);
      std::iota(expect.begin(), expect.end(), 0);
      EXPECT_EQ(all, expect);
      EXPECT_EQ(ChannelPlan::parse(p.serialize()), p);
    }
  }
  EXPECT_EQ(ChannelPlan::build(6, 1).serialize(), "offset -1: 0,1\noffset 0: 2,3\noffset 1: 4,5\n");
  EXPECT_THROW(ChannelPlan::parse("offset 0: 0,0\n"), std::invalid_argument);
}

TEST(AssembleMixedKv, ChannelAlignedGatherWithClamping) {
  std::mt19937_64 rng(1);
  const TokenField f = random_field(1, 3, 2, 6, rng);
  const ChannelPlan p = ChannelPlan::build(6, 1);
  const auto [k, v] = assemble_mixed_kv(f, p, 0, 1, 1);
  const std::size_t frame_of[6] = {0, 0, 1, 1, 2, 2};
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_EQ(k[c], f.k.at({0, frame_of[c], 1, c}));
    EXPECT_EQ(v[c], f.v.at({0, frame_of[c], 1, c}));
  }
  const auto [k0, v0] = assemble_mixed_kv(f, p, 0, 0, 0);
  for (std::size_t c = 0; c < 6; ++c) {
    const std::size_t src = c < 4 ? 0 : 1;  // offset -1 clamps to frame 0
    EXPECT_EQ(k0[c], f.k.at({0, src, 0, c}));
    EXPECT_EQ(v0[c], f.v.at({0, src, 0, c}));
  }
  const TokenField one = random_field(1, 1, 2, 6, rng);
  const auto [k1, v1] = assemble_mixed_kv(one, p, 0, 0, 1);
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(k1[c], one.k.at({0, 0, 1, c}));
}

TEST(StmAttention, SingleTokenReturnsValue) {
  std::mt19937_64 rng(2);
  const TokenField f = random_field(2, 1, 1, 4, rng);
  EXPECT_LE(max_abs_diff(stm_attention(f, ChannelPlan::build(4, 0)).y, f.v), 1e-15);
}

TEST(StmAttention, ZeroQueryAveragesMixedValues) {
  std::mt19937_64 rng(3);
  TokenField f = random_field(1, 3, 4, 6, rng);
  f.q = Tensor(f.q.shape(), 0.0);
  const ChannelPlan p = ChannelPlan::build(6, 1);
  const Tensor y = stm_attention(f, p).y;
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<double> mean(6, 0.0);
    for (std::size_t s = 0; s < 4; ++s) {
      const auto kv = assemble_mixed_kv(f, p, 0, t, s);
      for (std::size_t c = 0; c < 6; ++c) mean[c] += kv.second[c] / 4.0;
    }
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(y.at({0, t, s, c}), mean[c], 1e-12);
  }
}

TEST(StmAttention, MatchesMixingReferenceOnSeededCases) {
  std::mt19937_64 rng(4);
  const TokenField f = random_field(1, 3, 2, 4, rng);
  const ChannelPlan p = ChannelPlan::build(4, 1);
  EXPECT_LE(max_abs_diff(stm_attention(f, p).y, mixing_reference(f, p).y), 1e-12);
  std::uniform_int_distribution<std::size_t> S(1, 6), T(1, 5), d(3, 12), H(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dh = d(rng);
    const int t_w = static_cast<int>(std::min<std::size_t>((dh - 1) / 2, trial % 3));
    const TokenField g = random_field(H(rng), T(rng), S(rng), dh, rng);
    const ChannelPlan plan = ChannelPlan::build(dh, t_w);
    EXPECT_LE(max_abs_diff(stm_attention(g, plan).y, mixing_reference(g, plan).y), 1e-12);
  }
}

TEST(StmAttention, WindowCollapseAndSingleFrame) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const TokenField f = random_field(2, 4, 5, 6, rng);
    EXPECT_LE(max_abs_diff(stm_attention(f, ChannelPlan::build(6, 0)).y, spatial_attention(f).y), 1e-15);
    const TokenField one = random_field(2, 1, 5, 6, rng);
    EXPECT_LE(max_abs_diff(full_st_attention(one).y, spatial_attention(one).y), 1e-15);
    EXPECT_LE(max_abs_diff(stm_attention(one, ChannelPlan::build(6, 2)).y, spatial_attention(one).y), 1e-15);
  }
}

TEST(StmAttention, WeightsAreDistributions) {
  std::mt19937_64 rng(6);
  const TokenField f = random_field(2, 3, 5, 6, rng);
  const Tensor w = stm_attention_weights(f, ChannelPlan::build(6, 1));
  ASSERT_EQ(w.shape(), (Shape{6, 5, 5}));
  for (std::size_t r = 0; r < 30; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_GE(w[r * 5 + j], 0.0);
      s += w[r * 5 + j];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(StmAttention, SpatialPermutationEquivariance) {
  std::mt19937_64 rng(7);
  for (int t_w : {0, 1, 2}) {
    const TokenField f = random_field(2, 3, 6, 7, rng);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permute = [&](const Tensor& x) {
      Tensor out(x.shape());
      for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t t = 0; t < 3; ++t)
          for (std::size_t s = 0; s < 6; ++s)
            for (std::size_t c = 0; c < 7; ++c) out.at({h, t, s, c}) = x.at({h, t, perm[s], c});
      return out;
    };
    const ChannelPlan p = ChannelPlan::build(7, t_w);
    const Tensor y = stm_attention(f, p).y;
    const Tensor yp = stm_attention(TokenField(permute(f.q), permute(f.k), permute(f.v)), p).y;
    EXPECT_LE(max_abs_diff(yp, permute(y)), 1e-12);
  }
}

TEST(SpatialAttention, MatchesPerFrameOracle) {
  std::mt19937_64 rng(8);
  const TokenField f = random_field(1, 2, 4, 5, rng);
  EXPECT_LE(max_abs_diff(spatial_attention(f).y, per_frame_oracle(f)), 1e-12);
}

TEST(FullAttention, UniformScoresGiveGlobalMean) {
  std::mt19937_64 rng(9);
  TokenField f = random_field(1, 3, 4, 5, rng);
  f.q = Tensor(f.q.shape(), 1.0);
  f.k = Tensor(f.k.shape(), 1.0);
  const Tensor y = full_st_attention(f).y;
  for (std::size_t c = 0; c < 5; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t s = 0; s < 4; ++s) mean += f.v.at({0, t, s, c}) / 12.0;
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t s = 0; s < 4; ++s) EXPECT_NEAR(y.at({0, t, s, c}), mean, 1e-12);
  }
}

TEST(AttentionMacs, FullQuadraticStmLinear) {
  std::mt19937_64 rng(10);
  auto macs = [&](std::size_t T, bool full) {
    const TokenField f = random_field(1, T, 9, 8, rng);
    MacCounter c;
    MacScope scope(c);
    if (full) {
      full_st_attention(f);
    } else {
      stm_attention(f, ChannelPlan::build(8, 1));
    }
    return static_cast<double>(c.macs());
  };
  const double full_ratio = macs(8, true) / macs(4, true);
  EXPECT_GE(full_ratio, 3.8);
  EXPECT_LE(full_ratio, 4.2);
  const double stm_ratio = macs(8, false) / macs(4, false);
  EXPECT_GE(stm_ratio, 1.9);
  EXPECT_LE(stm_ratio, 2.1);
  EXPECT_EQ(macs(1, true), macs(1, false));
}

TEST(AttentionGradients, StmFullAndSpatial) {
  std::mt19937_64 rng(11);
  const Shape s{2, 3, 4, 6};
  const std::vector<Tensor> qkv{random_tensor(s, rng), random_tensor(s, rng), random_tensor(s, rng)};
  for (int t_w : {0, 1, 2}) {
    const ChannelPlan p = ChannelPlan::build(6, t_w);
    EXPECT_LT(grad_check([&](std::span<const Var> in) { return ag::sum(stm_attention(in[0], in[1], in[2], p)); }, qkv).max_rel_error,
              1e-4);
  }
  EXPECT_LT(grad_check([](std::span<const Var> in) { return ag::sum(full_st_attention(in[0], in[1], in[2])); }, qkv).max_rel_error,
            1e-4);
  EXPECT_LT(grad_check([](std::span<const Var> in) { return ag::sum(spatial_attention(in[0], in[1], in[2])); }, qkv).max_rel_error,
            1e-4);
}

TEST(Attention, ShapeMismatchRejected) {
  EXPECT_THROW(TokenField(Tensor({1, 2, 3, 4}), Tensor({1, 2, 3, 5}), Tensor({1, 2, 3, 4})), std::invalid_argument);
  std::mt19937_64 rng(12);
  const TokenField f = random_field(1, 2, 3, 4, rng);
  EXPECT_THROW(stm_attention(f, ChannelPlan::build(6, 1)), std::invalid_argument);
}
