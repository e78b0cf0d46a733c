#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vidrec/gsf.hpp"

using namespace vidrec;
using vidrec::testing::random_tensor;

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Loop-oracle gate: sigmoid(conv3x3x3 + b) per group, broadcast in the group.
Tensor gate_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t C = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor g({C, T, H, W});
  for (std::size_t grp = 0; grp < 2; ++grp)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) {
          double s = b[grp];
          for (std::size_t c = 0; c < C; ++c)
            for (long a = -1; a <= 1; ++a)
              for (long bb = -1; bb <= 1; ++bb)
                for (long d = -1; d <= 1; ++d) {
                  const long ts = long(t) + a, ys = long(y) + bb, xs = long(xx) + d;
                  if (ts < 0 || ys < 0 || xs < 0 || ts >= long(T) || ys >= long(H) || xs >= long(W)) continue;
                  s += w.at({grp, c, std::size_t(a + 1), std::size_t(bb + 1), std::size_t(d + 1)}) *
                       x.at({c, std::size_t(ts), std::size_t(ys), std::size_t(xs)});
                }
          for (std::size_t c = grp * C / 2; c < (grp + 1) * C / 2; ++c) g.at({c, t, y, xx}) = sigmoid(s);
        }
  return g;
}

Tensor shift_oracle(const Tensor& x) {
  const std::size_t C = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out({C, T, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < T; ++t) {
      const long src = c < C / 2 ? long(t) - 1 : long(t) + 1;
      if (src < 0 || src >= long(T)) continue;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) out.at({c, t, y, xx}) = x.at({c, std::size_t(src), y, xx});
    }
  return out;
}

// w_c = sigmoid(sum_j mean([shifted; residual])_j fuse.w[j, c] + fuse.b[c]).
Tensor weighted_oracle(const Tensor& sh, const Tensor& res, const Tensor& fw, const Tensor& fb) {
  const std::size_t C = sh.dim(0), inner = sh.size() / C;
  std::vector<double> pooled(2 * C, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < inner; ++i) {
      pooled[c] += sh[c * inner + i] / double(inner);
      pooled[C + c] += res[c * inner + i] / double(inner);
    }
  Tensor out(sh.shape());
  for (std::size_t c = 0; c < C; ++c) {
    double z = fb[c];
    for (std::size_t j = 0; j < 2 * C; ++j) z += pooled[j] * fw.at({j, c});
    const double w = sigmoid(z);
    for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] = w * sh[c * inner + i] + (1 - w) * res[c * inner + i];
  }
  return out;
}

ParamStore gsf_params(const GsfConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore p;
  add_gsf_params(p, "g", cfg, rng);
  return p;
}

}  // namespace

TEST(SpatialGating, SaturationAndZeroWeights) {
  std::mt19937_64 rng(1);
  const Var x = constant(random_tensor({4, 3, 5, 5}, rng));
  const Tensor half = spatial_gating(x, constant(Tensor({2, 4, 3, 3, 3})), constant(Tensor({2}))).value();
  for (double v : half.data()) EXPECT_EQ(v, 0.5);
  const Tensor closed =
      spatial_gating(x, constant(random_tensor({2, 4, 3, 3, 3}, rng, 0.1)), constant(Tensor({2}, -40.0))).value();
  for (double v : closed.data()) EXPECT_LT(v, 1e-8);
}

TEST(SpatialGating, MatchesConvOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({4, 3, 4, 5}, rng), w = random_tensor({2, 4, 3, 3, 3}, rng, 0.3),
                 b = random_tensor({2}, rng);
    const Tensor g = spatial_gating(constant(x), constant(w), constant(b)).value();
    EXPECT_LE(max_abs_diff(g, gate_oracle(x, w, b)), 1e-12);
    for (double v : g.data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(GsfConfig, OddChannelsRejected) {
  EXPECT_THROW((GsfConfig{5, Fusion::kAdditive}.validate()), std::invalid_argument);
  std::mt19937_64 rng(0);
  ParamStore p;
  EXPECT_THROW(add_gsf_params(p, "g", GsfConfig{3, Fusion::kWeighted}, rng), std::invalid_argument);
  EXPECT_THROW(parse_fusion("mean"), std::invalid_argument);
}

TEST(GateSplit, ExtremesAndConservation) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng);
  const GateSplit open = gate_split(constant(x), constant(Tensor(x.shape(), 1.0)));
  EXPECT_EQ(open.gated.value(), x);
  EXPECT_EQ(open.residual.value(), Tensor(x.shape(), 0.0));
  const GateSplit shut = gate_split(constant(x), constant(Tensor(x.shape(), 0.0)));
  EXPECT_EQ(shut.gated.value(), Tensor(x.shape(), 0.0));
  EXPECT_EQ(shut.residual.value(), x);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor g(x.shape());
    for (double& v : g.data()) v = u(rng);
    const GateSplit s = gate_split(constant(x), constant(g));
    const Tensor sum = ag::add(s.gated, s.residual).value();
    EXPECT_LE(max_abs_diff(sum, x), 1e-12);
  }
  EXPECT_THROW(gate_split(constant(x), constant(Tensor({2, 3, 4, 5}))), std::invalid_argument);
}

TEST(TemporalShift, DefinitionAndBoundaries) {
  Tensor x({2, 3, 1, 1}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(temporal_shift(x), Tensor({2, 3, 1, 1}, {0, 1, 2, 5, 6, 0}));
  std::mt19937_64 rng(4);
  EXPECT_EQ(temporal_shift(random_tensor({4, 1, 3, 3}, rng)), Tensor({4, 1, 3, 3}, 0.0));
  const Tensor r = random_tensor({6, 5, 3, 2}, rng);
  EXPECT_EQ(temporal_shift(r), shift_oracle(r));
}

TEST(TemporalShift, SumConservationLessEvictedFrames) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({4, 5, 2, 3}, rng);
  const Tensor y = temporal_shift(x);
  const std::size_t plane = 6, T = 5;
  for (std::size_t c = 0; c < 4; ++c) {
    double in = 0.0, out = 0.0, evicted = 0.0;
    const std::size_t last = c < 2 ? T - 1 : 0;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < plane; ++i) {
        in += x[(c * T + t) * plane + i];
        out += y[(c * T + t) * plane + i];
        if (t == last) evicted += x[(c * T + t) * plane + i];
      }
    EXPECT_NEAR(out, in - evicted, 1e-12);
  }
}

TEST(TemporalShift, LocalityAndLinearity) {
  std::mt19937_64 rng(6);
  const Tensor a = random_tensor({4, 6, 2, 2}, rng), b = random_tensor({4, 6, 2, 2}, rng);
  for (std::size_t tp = 0; tp < 6; ++tp) {
    Tensor p = a;
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < 4; ++i) p[(c * 6 + tp) * 4 + i] += 1.0;
    const Tensor d0 = temporal_shift(a), d1 = temporal_shift(p);
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t t = 0; t < 6; ++t) {
        bool changed = false;
        for (std::size_t i = 0; i < 4; ++i) changed |= d0[(c * 6 + t) * 4 + i] != d1[(c * 6 + t) * 4 + i];
        const std::size_t receiver = c < 2 ? tp + 1 : tp - 1;
        EXPECT_EQ(changed, t == receiver && t < 6) << "c " << c << " t " << t << " perturbed " << tp;
      }
  }
  Tensor mix(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) mix[i] = 0.7 * a[i] - 1.3 * b[i];
  Tensor expect(a.shape());
  const Tensor sa = temporal_shift(a), sb = temporal_shift(b);
  for (std::size_t i = 0; i < a.size(); ++i) expect[i] = 0.7 * sa[i] - 1.3 * sb[i];
  EXPECT_LE(max_abs_diff(temporal_shift(mix), expect), 1e-12);
}

TEST(FuseAdd, IdentitiesAndCommutativity) {
  std::mt19937_64 rng(7);
  const Tensor a = random_tensor({2, 2, 3, 3}, rng), b = random_tensor({2, 2, 3, 3}, rng);
  const Tensor z(a.shape());
  EXPECT_EQ(fuse_add(constant(z), constant(b)).value(), b);
  EXPECT_EQ(fuse_add(constant(a), constant(z)).value(), a);
  EXPECT_EQ(fuse_add(constant(a), constant(b)).value(), fuse_add(constant(b), constant(a)).value());
  EXPECT_THROW(fuse_add(constant(a), constant(Tensor({2, 2, 3, 4}))), std::invalid_argument);
}

TEST(FuseWeighted, SaturationLoopOracleAndConvexity) {
  std::mt19937_64 rng(8);
  const Tensor sh = random_tensor({4, 3, 3, 3}, rng), res = random_tensor({4, 3, 3, 3}, rng);
  const Tensor fw = random_tensor({8, 4}, rng, 0.1);
  const Tensor one = fuse_weighted(constant(sh), constant(res), constant(fw), constant(Tensor({4}, 60.0))).value();
  EXPECT_LE(max_abs_diff(one, sh), 1e-15);
  const Tensor zero = fuse_weighted(constant(sh), constant(res), constant(fw), constant(Tensor({4}, -60.0))).value();
  EXPECT_LE(max_abs_diff(zero, res), 1e-15);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor w = random_tensor({8, 4}, rng), b = random_tensor({4}, rng);
    const Tensor out = fuse_weighted(constant(sh), constant(res), constant(w), constant(b)).value();
    EXPECT_LE(max_abs_diff(out, weighted_oracle(sh, res, w, b)), 1e-12);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_GE(out[i], std::min(sh[i], res[i]) - 1e-15);
      EXPECT_LE(out[i], std::max(sh[i], res[i]) + 1e-15);
    }
  }
}

TEST(FuseWeighted, WeightsDependOnData) {
  std::mt19937_64 rng(9);
  const Var w = constant(random_tensor({8, 4}, rng)), b = constant(random_tensor({4}, rng));
  const Tensor w1 = fusion_weights(constant(random_tensor({4, 2, 3, 3}, rng)), constant(random_tensor({4, 2, 3, 3}, rng)), w, b).value();
  const Tensor w2 = fusion_weights(constant(random_tensor({4, 2, 3, 3}, rng)), constant(random_tensor({4, 2, 3, 3}, rng)), w, b).value();
  EXPECT_EQ(w1.shape(), Shape{4});
  EXPECT_GT(max_abs_diff(w1, w2), 1e-6);
}

TEST(GsfForward, IdentityReductionsAndShape) {
  std::mt19937_64 rng(10);
  const GsfConfig add{4, Fusion::kAdditive};
  ParamStore p = gsf_params(add, 10);
  const Tensor x = random_tensor({4, 3, 4, 4}, rng);
  p.get("g.gate.b") = Tensor({2}, -1000.0);
  EXPECT_EQ(gsf_forward(x, add, p, "g"), x);
  p.get("g.gate.b") = Tensor({2}, 1000.0);
  const Tensor single = random_tensor({4, 1, 4, 4}, rng);
  EXPECT_EQ(gsf_forward(single, add, p, "g"), Tensor(single.shape(), 0.0));
  EXPECT_THROW(gsf_forward(random_tensor({6, 3, 4, 4}, rng), add, p, "g"), std::invalid_argument);
}

TEST(GsfForward, MatchesCompositionOfOracles) {
  std::mt19937_64 rng(11);
  for (Fusion fusion : {Fusion::kAdditive, Fusion::kWeighted}) {
    const GsfConfig cfg{6, fusion};
    ParamStore p = gsf_params(cfg, 11);
    p.get("g.gate.b") = random_tensor({2}, rng);
    const Tensor x = random_tensor({6, 4, 3, 5}, rng);
    const Tensor gate = gate_oracle(x, p.get("g.gate.w"), p.get("g.gate.b"));
    Tensor gated(x.shape()), residual(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      gated[i] = gate[i] * x[i];
      residual[i] = x[i] - gated[i];
    }
    const Tensor shifted = shift_oracle(gated);
    Tensor expect(x.shape());
    if (fusion == Fusion::kAdditive) {
      for (std::size_t i = 0; i < x.size(); ++i) expect[i] = shifted[i] + residual[i];
    } else {
      expect = weighted_oracle(shifted, residual, p.get("g.fuse.w"), p.get("g.fuse.b"));
    }
    EXPECT_LE(max_abs_diff(gsf_forward(x, cfg, p, "g"), expect), 1e-12);
    const GsfState st = gsf_trace(x, cfg, p, "g");
    EXPECT_LE(max_abs_diff(st.gate, gate), 1e-12);
    EXPECT_EQ(st.fusion_w.has_value(), fusion == Fusion::kWeighted);
    EXPECT_LE(max_abs_diff(ag::add(constant(st.gated), constant(st.residual)).value(), x), 1e-12);
    EXPECT_EQ(st.output, gsf_forward(x, cfg, p, "g"));
  }
}

TEST(GsfForward, GradCheckBothFusions) {
  std::mt19937_64 rng(12);
  for (Fusion fusion : {Fusion::kAdditive, Fusion::kWeighted}) {
    const GsfConfig cfg{4, fusion};
    ParamStore p = gsf_params(cfg, 12);
    p.get("g.gate.b") = random_tensor({2}, rng, 0.5);
    const Tensor probe = random_tensor({4, 3, 4, 4}, rng);
    std::vector<Tensor> inputs{random_tensor({4, 3, 4, 4}, rng)};
    for (const std::string& n : p.names()) inputs.push_back(p.get(n));
    const auto names = p.names();
    const Program f = [&](std::span<const Var> in) {
      return ag::sum(ag::mul(gsf_forward(in[0], cfg, BoundParams::bind(names, in.subspan(1)), "g"), constant(probe)));
    };
    EXPECT_LT(grad_check(f, inputs).max_rel_error, 1e-4) << fusion_name(fusion);
  }
}

TEST(ToyBackbone, ShapesAndValidation) {
  ToyBackboneConfig cfg;
  cfg.classes = {4, 5, 11};
  const ToyGsfModel m(cfg);
  std::mt19937_64 rng(13);
  const PredictionScores s = m.predict(random_tensor({8, 3, 32, 32}, rng), m.init_params(13));
  EXPECT_EQ(s.counts(), (ClassCounts{4, 5, 11}));
  ToyBackboneConfig tiny;
  tiny.input_h = tiny.input_w = 6;
  EXPECT_THROW(ToyGsfModel{tiny}, std::invalid_argument);
  EXPECT_THROW(m.predict(Tensor({8, 3, 16, 16}), m.init_params(0)), std::invalid_argument);
}

TEST(ToyBackbone, ClosedGatesReduceToPlainBackbone) {
  ToyBackboneConfig cfg;
  cfg.fusion = Fusion::kAdditive;
  cfg.frames = 4;
  const ToyGsfModel gsf(cfg);
  cfg.use_gsf = false;
  const ToyGsfModel plain(cfg);
  ParamStore gp = gsf.init_params(14), pp;
  for (const std::string& n : gp.names()) {
    if (n.find(".gate.b") != std::string::npos) gp.get(n) = Tensor({2}, -1000.0);
    if (n.find(".gsf.") == std::string::npos) pp.add(n, gp.get(n));
  }
  std::mt19937_64 rng(14);
  const Tensor clip = random_tensor({4, 3, 32, 32}, rng);
  const PredictionScores a = gsf.predict(clip, gp), b = plain.predict(clip, pp);
  EXPECT_EQ(a.verb, b.verb);
  EXPECT_EQ(a.noun, b.noun);
  EXPECT_EQ(a.action, b.action);
}

TEST(ToyBackbone, GradCheckAllParameters) {
  ToyBackboneConfig cfg;
  cfg.widths = {4, 6};
  cfg.frames = 3;
  cfg.input_h = cfg.input_w = 8;
  const ToyGsfModel model(cfg);
  const ParamStore store = model.init_params(15);
  std::mt19937_64 rng(15);
  const Tensor clip = random_tensor({3, 3, 8, 8}, rng);
  std::vector<Tensor> inputs;
  for (const std::string& n : store.names()) inputs.push_back(store.get(n));
  const auto names = store.names();
  const Program f = [&](std::span<const Var> in) {
    return multitask_loss(model.forward(clip, BoundParams::bind(names, in)), TaskLabels{1, 0, 4});
  };
  EXPECT_LT(grad_check(f, inputs).max_rel_error, 1e-4);
}
