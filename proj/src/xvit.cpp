#include "vidrec/xvit.hpp"

#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace vidrec {

XViTConfig XViTConfig::full_preset(std::size_t input_side) {
  XViTConfig cfg;
  cfg.layers = 12;
  cfg.heads = 12;
  cfg.embed_dim = 768;
  cfg.patch = 16;
  cfg.t_w = 1;
  cfg.frames = 16;
  cfg.input_h = input_side;
  cfg.input_w = input_side;
  cfg.channels = 3;
  cfg.mlp_ratio = 4;
  cfg.classes = {97, 300, 3806};
  return cfg;
}

void XViTConfig::validate() const {
  if (!layers || !heads || !embed_dim || !patch || !frames || !channels || !mlp_ratio) {
    throw std::invalid_argument("xvit config: extents must be positive");
  }
  if (embed_dim % heads) throw std::invalid_argument("xvit config: embed_dim must be divisible by heads");
  if (input_h % patch || input_w % patch || input_h < patch || input_w < patch) {
    throw std::invalid_argument("xvit config: input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                                " not divisible by patch " + std::to_string(patch));
  }
  if (t_w < 0 || head_dim() < static_cast<std::size_t>(2 * t_w + 1)) {
    throw std::invalid_argument("xvit config: head dim too small for temporal window");
  }
  if (!classes.verbs || !classes.nouns || !classes.actions) {
    throw std::invalid_argument("xvit config: class counts must be positive");
  }
}

namespace {

std::shared_ptr<std::vector<std::ptrdiff_t>> make_index(std::size_t n) {
  return std::make_shared<std::vector<std::ptrdiff_t>>(n);
}

}  // namespace

Var patchify(const Var& frames, std::size_t patch, const Var& weight, const Var& bias) {
  const Shape& s = frames.shape();
  if (s.size() != 4) throw std::invalid_argument("patchify expects [T x C x H x W], got " + shape_str(s));
  const std::size_t T = s[0], C = s[1], H = s[2], W = s[3];
  if (patch == 0 || H % patch || W % patch) {
    throw std::invalid_argument("patchify: " + std::to_string(H) + "x" + std::to_string(W) +
                                " frame is not divisible into " + std::to_string(patch) + "-pixel patches");
  }
  const std::size_t gh = H / patch, gw = W / patch, S = gh * gw, D = C * patch * patch;
  auto idx = make_index(T * S * D);
  std::size_t o = 0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t py = 0; py < gh; ++py) {
      for (std::size_t px = 0; px < gw; ++px) {
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t y = 0; y < patch; ++y) {
            for (std::size_t x = 0; x < patch; ++x) {
              (*idx)[o++] =
                  static_cast<std::ptrdiff_t>(((t * C + c) * H + py * patch + y) * W + px * patch + x);
            }
          }
        }
      }
    }
  }
  const Var blocks = ag::gather(frames, Shape{T * S, D}, idx);
  const Var tokens = ag::linear(blocks, weight, bias);
  return ag::reshape(tokens, Shape{T, S, weight.shape()[1]});
}

Tensor patchify(const Tensor& frames, std::size_t patch, const Tensor& weight, const Tensor& bias) {
  return patchify(constant(frames), patch, constant(weight), constant(bias)).value();
}

XViTModel::XViTModel(XViTConfig cfg)
    : cfg_((cfg.validate(), cfg)), plan_(ChannelPlan::build(cfg_.head_dim(), cfg_.t_w)) {}

ParamStore XViTModel::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const std::size_t E = cfg_.embed_dim, P = cfg_.channels * cfg_.patch * cfg_.patch, M = E * cfg_.mlp_ratio;
  ParamStore p;
  p.add("patch.w", uniform_init(Shape{P, E}, P, rng));
  p.add("patch.b", uniform_init(Shape{E}, P, rng));
  p.add("pos", uniform_init(Shape{cfg_.tokens_per_frame(), E}, E, rng));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string b = "block" + std::to_string(l) + ".";
    p.add(b + "ln1.g", Tensor(Shape{E}, 1.0));
    p.add(b + "ln1.b", Tensor(Shape{E}, 0.0));
    p.add(b + "qkv.w", uniform_init(Shape{E, 3 * E}, E, rng));
    p.add(b + "qv.b", uniform_init(Shape{2 * E}, E, rng));
    p.add(b + "proj.w", uniform_init(Shape{E, E}, E, rng));
    p.add(b + "proj.b", uniform_init(Shape{E}, E, rng));
    p.add(b + "ln2.g", Tensor(Shape{E}, 1.0));
    p.add(b + "ln2.b", Tensor(Shape{E}, 0.0));
    p.add(b + "mlp1.w", uniform_init(Shape{E, M}, E, rng));
    p.add(b + "mlp1.b", uniform_init(Shape{M}, E, rng));
    p.add(b + "mlp2.w", uniform_init(Shape{M, E}, M, rng));
    p.add(b + "mlp2.b", uniform_init(Shape{E}, M, rng));
  }
  p.add("final_ln.g", Tensor(Shape{E}, 1.0));
  p.add("final_ln.b", Tensor(Shape{E}, 0.0));
  add_head_params(p, "head", E, cfg_.classes, rng);
  return p;
}

ScoreVars XViTModel::forward(const Tensor& clip, const BoundParams& params) const {
  return forward(clip, params, nullptr);
}

ScoreVars XViTModel::forward(const Tensor& clip, const BoundParams& params, MacCounter* attention_macs) const {
  const Shape expected{cfg_.frames, cfg_.channels, cfg_.input_h, cfg_.input_w};
  if (clip.shape() != expected) {
    throw std::invalid_argument("xvit: clip " + shape_str(clip.shape()) + " does not match config " +
                                shape_str(expected));
  }
  const std::size_t T = cfg_.frames, S = cfg_.tokens_per_frame(), E = cfg_.embed_dim, H = cfg_.heads,
                    D = cfg_.head_dim(), N = T * S;

  // Head split: [N x 3E] -> three [H x T x S x D] fields.
  ag::GatherIndex split[3];
  for (std::size_t part = 0; part < 3; ++part) {
    auto idx = make_index(N * E);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < D; ++c) {
          (*idx)[(h * N + n) * D + c] = static_cast<std::ptrdiff_t>(n * 3 * E + part * E + h * D + c);
        }
      }
    }
    split[part] = idx;
  }
  auto merge = make_index(N * E);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t c = 0; c < D; ++c) {
        (*merge)[n * E + h * D + c] = static_cast<std::ptrdiff_t>((h * N + n) * D + c);
      }
    }
  }
  auto pos_idx = make_index(N * E);
  auto pool_idx = make_index(N * E);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t e = 0; e < E; ++e) {
      (*pos_idx)[n * E + e] = static_cast<std::ptrdiff_t>((n % S) * E + e);
      (*pool_idx)[e * N + n] = static_cast<std::ptrdiff_t>(n * E + e);
    }
  }

  // Key bias is fixed at 0: it shifts every score of a query equally.
  auto qkv_bias = make_index(3 * E);
  for (std::size_t e = 0; e < E; ++e) {
    (*qkv_bias)[e] = static_cast<std::ptrdiff_t>(e);
    (*qkv_bias)[E + e] = -1;
    (*qkv_bias)[2 * E + e] = static_cast<std::ptrdiff_t>(E + e);
  }

  const Var tokens = patchify(constant(clip), cfg_.patch, params["patch.w"], params["patch.b"]);
  Var x = ag::add(ag::reshape(tokens, Shape{N, E}), ag::gather(params["pos"], Shape{N, E}, pos_idx));

  const Shape field{H, T, S, D};
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string b = "block" + std::to_string(l) + ".";
    const Var h1 = ag::layer_norm(x, params[b + "ln1.g"], params[b + "ln1.b"]);
    const Var qkv = ag::linear(h1, params[b + "qkv.w"], ag::gather(params[b + "qv.b"], Shape{3 * E}, qkv_bias));
    const Var q = ag::gather(qkv, field, split[0]);
    const Var k = ag::gather(qkv, field, split[1]);
    const Var v = ag::gather(qkv, field, split[2]);
    Var y;
    {
      std::optional<MacScope> scope;
      if (attention_macs) scope.emplace(*attention_macs);
      y = stm_attention(q, k, v, plan_);
    }
    const Var merged = ag::gather(y, Shape{N, E}, merge);
    x = ag::add(x, ag::linear(merged, params[b + "proj.w"], params[b + "proj.b"]));
    const Var h2 = ag::layer_norm(x, params[b + "ln2.g"], params[b + "ln2.b"]);
    const Var hidden = ag::gelu(ag::linear(h2, params[b + "mlp1.w"], params[b + "mlp1.b"]));
    x = ag::add(x, ag::linear(hidden, params[b + "mlp2.w"], params[b + "mlp2.b"]));
  }
  x = ag::layer_norm(x, params["final_ln.g"], params["final_ln.b"]);
  const Var pooled = ag::mean_lastdim(ag::gather(x, Shape{E, N}, pool_idx));
  return multitask_heads(pooled, params, "head");
}

PredictionScores xvit_forward(const Tensor& clip, const XViTConfig& cfg, const ParamStore& params) {
  return XViTModel(cfg).predict(clip, params);
}

}  // namespace vidrec
