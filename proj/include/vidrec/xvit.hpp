#pragma once

#include <cstddef>
#include <cstdint>

#include "vidrec/attention.hpp"
#include "vidrec/model.hpp"

namespace vidrec {

struct XViTConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t embed_dim = 32;
  std::size_t patch = 8;
  int t_w = 1;
  std::size_t frames = 8;
  std::size_t input_h = 32;
  std::size_t input_w = 32;
  std::size_t channels = 3;
  std::size_t mlp_ratio = 4;
  ClassCounts classes{3, 3, 9};

  // ViT-B/16 shape with a temporal window of 1 over 16 frames, and heads for
  // 97 verbs, 300 nouns and 3806 actions.
  static XViTConfig full_preset(std::size_t input_side = 112);

  void validate() const;
  std::size_t head_dim() const { return embed_dim / heads; }
  std::size_t tokens_per_frame() const { return (input_h / patch) * (input_w / patch); }
};

// Splits each frame of a [T x C x H x W] clip into non-overlapping patch x
// patch blocks in raster order and embeds each flattened (c, y, x) block
// with `weight` [C*patch*patch x E] and `bias` [E]. Returns [T x S x E].
Var patchify(const Var& frames, std::size_t patch, const Var& weight, const Var& bias);
Tensor patchify(const Tensor& frames, std::size_t patch, const Tensor& weight, const Tensor& bias);

// Pre-norm transformer whose self-attention is the space-time mixing
// attention; tokens are mean-pooled over space and time into the heads.
class XViTModel final : public VideoModel {
 public:
  explicit XViTModel(XViTConfig cfg);

  const XViTConfig& config() const { return cfg_; }

  std::string name() const override { return "xvit"; }
  ParamStore init_params(std::uint64_t seed) const override;
  ScoreVars forward(const Tensor& clip, const BoundParams& params) const override;

  // As forward(), additionally routing the attention MACs into `attention_macs`.
  ScoreVars forward(const Tensor& clip, const BoundParams& params, MacCounter* attention_macs) const;

  std::size_t frames() const override { return cfg_.frames; }
  std::size_t input_height() const override { return cfg_.input_h; }
  std::size_t input_width() const override { return cfg_.input_w; }
  ClassCounts classes() const override { return cfg_.classes; }

 private:
  XViTConfig cfg_;
  ChannelPlan plan_;
};

PredictionScores xvit_forward(const Tensor& clip, const XViTConfig& cfg, const ParamStore& params);

}  // namespace vidrec
