#include "vidrec/gsf.hpp"

#include <cmath>
#include <stdexcept>

namespace vidrec {

Fusion parse_fusion(const std::string& name) {
  if (name == "additive") return Fusion::kAdditive;
  if (name == "weighted") return Fusion::kWeighted;
  throw std::invalid_argument("unknown fusion '" + name + "' (expected additive or weighted)");
}

const char* fusion_name(Fusion f) { return f == Fusion::kAdditive ? "additive" : "weighted"; }

void GsfConfig::validate() const {
  if (channels == 0 || channels % kGroups) {
    throw std::invalid_argument("gsf: channel count " + std::to_string(channels) + " must be even and positive");
  }
}

void add_gsf_params(ParamStore& store, const std::string& prefix, const GsfConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t C = cfg.channels, k = GsfConfig::kGateKernel;
  const std::size_t fan_in = C * k * k * k;
  store.add(prefix + ".gate.w", uniform_init(Shape{GsfConfig::kGroups, C, k, k, k}, fan_in, rng));
  store.add(prefix + ".gate.b", uniform_init(Shape{GsfConfig::kGroups}, fan_in, rng));
  if (cfg.fusion == Fusion::kWeighted) {
    store.add(prefix + ".fuse.w", uniform_init(Shape{2 * C, C}, 2 * C, rng));
    store.add(prefix + ".fuse.b", uniform_init(Shape{C}, 2 * C, rng));
  }
}

namespace {

void require_feature_map(const char* op, const Var& x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw std::invalid_argument(std::string(op) + " expects [C x T x H x W], got " + shape_str(s));
  if (s[0] % GsfConfig::kGroups) {
    throw std::invalid_argument(std::string(op) + ": channel count " + std::to_string(s[0]) + " is odd");
  }
}

// [C] -> [C x inner] broadcast along the trailing axes.
Var expand_channels(const Var& w, std::size_t inner) {
  const std::size_t C = w.value().size();
  auto idx = std::make_shared<std::vector<std::ptrdiff_t>>(C * inner);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < inner; ++i) (*idx)[c * inner + i] = static_cast<std::ptrdiff_t>(c);
  }
  return ag::gather(w, Shape{C * inner}, idx);
}

}  // namespace

Var spatial_gating(const Var& x, const Var& gate_w, const Var& gate_b) {
  require_feature_map("spatial_gating", x);
  const Shape& s = x.shape();
  const std::size_t C = s[0], plane = s[1] * s[2] * s[3];
  const Var maps = ag::sigmoid(ag::add_channel(ag::conv3d(x, gate_w), gate_b));
  if (maps.shape()[0] != GsfConfig::kGroups) {
    throw std::invalid_argument("spatial_gating: gate kernel must emit one map per group");
  }
  const std::size_t per_group = C / GsfConfig::kGroups;
  auto idx = std::make_shared<std::vector<std::ptrdiff_t>>(C * plane);
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t g = c / per_group;
    for (std::size_t i = 0; i < plane; ++i) (*idx)[c * plane + i] = static_cast<std::ptrdiff_t>(g * plane + i);
  }
  return ag::gather(maps, s, idx);
}

GateSplit gate_split(const Var& x, const Var& gate) {
  if (x.shape() != gate.shape()) {
    throw std::invalid_argument("gate_split shape mismatch: " + shape_str(x.shape()) + " vs " +
                                shape_str(gate.shape()));
  }
  const Var gated = ag::mul(gate, x);
  return {gated, ag::sub(x, gated)};
}

Var temporal_shift(const Var& gated) {
  require_feature_map("temporal_shift", gated);
  const Shape& s = gated.shape();
  const std::size_t C = s[0], T = s[1], plane = s[2] * s[3];
  auto idx = std::make_shared<std::vector<std::ptrdiff_t>>(C * T * plane, -1);
  for (std::size_t c = 0; c < C; ++c) {
    const bool forward = c < C / 2;
    for (std::size_t t = 0; t < T; ++t) {
      const long src = forward ? static_cast<long>(t) - 1 : static_cast<long>(t) + 1;
      if (src < 0 || src >= static_cast<long>(T)) continue;
      for (std::size_t i = 0; i < plane; ++i) {
        (*idx)[(c * T + t) * plane + i] = static_cast<std::ptrdiff_t>((c * T + src) * plane + i);
      }
    }
  }
  return ag::gather(gated, s, idx);
}

Tensor temporal_shift(const Tensor& gated) { return temporal_shift(constant(gated)).value(); }

Var fuse_add(const Var& shifted, const Var& residual) { return ag::add(shifted, residual); }

Var fusion_weights(const Var& shifted, const Var& residual, const Var& fuse_w, const Var& fuse_b) {
  if (shifted.shape() != residual.shape()) {
    throw std::invalid_argument("fusion shape mismatch: " + shape_str(shifted.shape()) + " vs " +
                                shape_str(residual.shape()));
  }
  const Shape& s = shifted.shape();
  const std::size_t C = s[0], inner = shifted.value().size() / C;
  const Var both = ag::reshape(ag::concat0(shifted, residual), Shape{2 * C, inner});
  const Var pooled = ag::reshape(ag::mean_lastdim(both), Shape{1, 2 * C});
  return ag::reshape(ag::sigmoid(ag::linear(pooled, fuse_w, fuse_b)), Shape{C});
}

Var fuse_weighted(const Var& shifted, const Var& residual, const Var& fuse_w, const Var& fuse_b) {
  const Var w = fusion_weights(shifted, residual, fuse_w, fuse_b);
  const std::size_t inner = shifted.value().size() / shifted.shape()[0];
  const Var wide = ag::reshape(expand_channels(w, inner), shifted.shape());
  return ag::add(ag::mul(wide, shifted), ag::mul(ag::affine(wide, -1.0, 1.0), residual));
}

Var gsf_forward(const Var& x, const GsfConfig& cfg, const BoundParams& params, const std::string& prefix) {
  cfg.validate();
  if (x.shape().size() != 4 || x.shape()[0] != cfg.channels) {
    throw std::invalid_argument("gsf: input " + shape_str(x.shape()) + " does not have " +
                                std::to_string(cfg.channels) + " channels");
  }
  const Var gate = spatial_gating(x, params[prefix + ".gate.w"], params[prefix + ".gate.b"]);
  const GateSplit split = gate_split(x, gate);
  const Var shifted = temporal_shift(split.gated);
  if (cfg.fusion == Fusion::kAdditive) return fuse_add(shifted, split.residual);
  return fuse_weighted(shifted, split.residual, params[prefix + ".fuse.w"], params[prefix + ".fuse.b"]);
}

Tensor gsf_forward(const Tensor& x, const GsfConfig& cfg, const ParamStore& params, const std::string& prefix) {
  return gsf_forward(constant(x), cfg, BoundParams::constants(params), prefix).value();
}

GsfState gsf_trace(const Tensor& x, const GsfConfig& cfg, const ParamStore& store, const std::string& prefix) {
  cfg.validate();
  const BoundParams params = BoundParams::constants(store);
  const Var xv = constant(x);
  const Var gate = spatial_gating(xv, params[prefix + ".gate.w"], params[prefix + ".gate.b"]);
  const GateSplit split = gate_split(xv, gate);
  const Var shifted = temporal_shift(split.gated);
  GsfState state{gate.value(), split.gated.value(), split.residual.value(), shifted.value(), std::nullopt, Tensor()};
  if (cfg.fusion == Fusion::kAdditive) {
    state.output = fuse_add(shifted, split.residual).value();
  } else {
    state.fusion_w =
        fusion_weights(shifted, split.residual, params[prefix + ".fuse.w"], params[prefix + ".fuse.b"]).value();
    state.output = fuse_weighted(shifted, split.residual, params[prefix + ".fuse.w"], params[prefix + ".fuse.b"]).value();
  }
  return state;
}

// ---------------------------------------------------------------------------
// Toy backbone

void ToyBackboneConfig::validate() const {
  if (widths.empty()) throw std::invalid_argument("toy backbone needs at least one stage");
  for (std::size_t w : widths) {
    if (w == 0 || w % 2) throw std::invalid_argument("toy backbone stage widths must be even and positive");
  }
  if (input_h < 8 || input_w < 8) {
    throw std::invalid_argument("toy backbone input must be at least 8x8, got " + std::to_string(input_h) + "x" +
                                std::to_string(input_w));
  }
  if ((input_h >> widths.size()) == 0 || (input_w >> widths.size()) == 0) {
    throw std::invalid_argument("toy backbone input too small for the number of pooling stages");
  }
  if (!frames || !channels) throw std::invalid_argument("toy backbone: frames and channels must be positive");
  if (!classes.verbs || !classes.nouns || !classes.actions) {
    throw std::invalid_argument("toy backbone: class counts must be positive");
  }
}

ToyGsfModel::ToyGsfModel(ToyBackboneConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ParamStore ToyGsfModel::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParamStore p;
  std::size_t in = cfg_.channels;
  for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
    const std::string stage = "stage" + std::to_string(i);
    const std::size_t out = cfg_.widths[i];
    // He-uniform: keeps the feature scale through conv + GELU.
    p.add(stage + ".conv.w", uniform_init(Shape{out, in, 1, 3, 3}, in * 9, rng, std::sqrt(6.0)));
    p.add(stage + ".conv.b", uniform_init(Shape{out}, in * 9, rng));
    if (cfg_.use_gsf) add_gsf_params(p, stage + ".gsf", GsfConfig{out, cfg_.fusion}, rng);
    in = out;
  }
  add_head_params(p, "head", in, cfg_.classes, rng);
  return p;
}

ScoreVars ToyGsfModel::forward(const Tensor& clip, const BoundParams& params) const {
  const Shape expected{cfg_.frames, cfg_.channels, cfg_.input_h, cfg_.input_w};
  if (clip.shape() != expected) {
    throw std::invalid_argument("toy backbone: clip " + shape_str(clip.shape()) + " does not match config " +
                                shape_str(expected));
  }
  const std::size_t T = cfg_.frames, C = cfg_.channels, plane = cfg_.input_h * cfg_.input_w;
  // [T x C x H x W] -> [C x T x H x W]
  auto idx = std::make_shared<std::vector<std::ptrdiff_t>>(T * C * plane);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < plane; ++i) {
        (*idx)[(c * T + t) * plane + i] = static_cast<std::ptrdiff_t>((t * C + c) * plane + i);
      }
    }
  }
  Var x = ag::gather(constant(clip), Shape{C, T, cfg_.input_h, cfg_.input_w}, idx);
  for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
    const std::string stage = "stage" + std::to_string(i);
    x = ag::add_channel(ag::conv3d(x, params[stage + ".conv.w"]), params[stage + ".conv.b"]);
    if (cfg_.use_gsf) x = gsf_forward(x, GsfConfig{cfg_.widths[i], cfg_.fusion}, params, stage + ".gsf");
    x = ag::avg_pool2x2(ag::gelu(x));
  }
  const std::size_t width = x.shape()[0];
  const Var pooled = ag::mean_lastdim(ag::reshape(x, Shape{width, x.value().size() / width}));
  return multitask_heads(pooled, params, "head");
}

PredictionScores toy_backbone_forward(const Tensor& clip, const ToyBackboneConfig& cfg, const ParamStore& params) {
  return ToyGsfModel(cfg).predict(clip, params);
}

}  // namespace vidrec
