#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vidrec/model.hpp"

namespace vidrec {

enum class Fusion { kAdditive, kWeighted };

Fusion parse_fusion(const std::string& name);
const char* fusion_name(Fusion f);

// One gate-shift-fuse layer over C channels split into two groups.
// Parameters (under a prefix):
//   gate.w [2 x C x 3 x 3 x 3], gate.b [2]   one gating map per group
//   fuse.w [2C x C], fuse.b [C]               weighted fusion only
struct GsfConfig {
  static constexpr std::size_t kGroups = 2;
  static constexpr std::size_t kGateKernel = 3;

  std::size_t channels = 16;
  Fusion fusion = Fusion::kWeighted;

  void validate() const;
};

void add_gsf_params(ParamStore& store, const std::string& prefix, const GsfConfig& cfg, std::mt19937_64& rng);

// sigmoid(conv3d(x) + b) with one output map per channel group, broadcast to
// every channel of its group. x: [C x T x H x W].
Var spatial_gating(const Var& x, const Var& gate_w, const Var& gate_b);

struct GateSplit {
  Var gated;     // gate * x
  Var residual;  // x - gate * x
};
GateSplit gate_split(const Var& x, const Var& gate);

// First half of the channels moves forward in time (frame t takes t-1), the
// second half backward (frame t takes t+1); vacated frames are zero.
Var temporal_shift(const Var& gated);
Tensor temporal_shift(const Tensor& gated);

Var fuse_add(const Var& shifted, const Var& residual);

// Per-channel fusion weight sigmoid(fuse.w^T pool([shifted; residual]) + fuse.b),
// pooling over T, H and W. Returns [C].
Var fusion_weights(const Var& shifted, const Var& residual, const Var& fuse_w, const Var& fuse_b);
// w * shifted + (1 - w) * residual with w from fusion_weights.
Var fuse_weighted(const Var& shifted, const Var& residual, const Var& fuse_w, const Var& fuse_b);

Var gsf_forward(const Var& x, const GsfConfig& cfg, const BoundParams& params, const std::string& prefix);
Tensor gsf_forward(const Tensor& x, const GsfConfig& cfg, const ParamStore& params, const std::string& prefix);

// Every intermediate of one layer, for inspection.
struct GsfState {
  Tensor gate;
  Tensor gated;
  Tensor residual;
  Tensor shifted;
  std::optional<Tensor> fusion_w;
  Tensor output;
};
GsfState gsf_trace(const Tensor& x, const GsfConfig& cfg, const ParamStore& params, const std::string& prefix);

// Stand-in 2D backbone: per stage a per-frame 3x3 conv + bias, an optional
// GSF layer across time, GELU, then 2x2 average pooling; global average
// pooling over (T, H, W) feeds the multitask heads.
struct ToyBackboneConfig {
  std::vector<std::size_t> widths{16, 32};
  bool use_gsf = true;
  Fusion fusion = Fusion::kWeighted;
  std::size_t frames = 8;
  std::size_t input_h = 32;
  std::size_t input_w = 32;
  std::size_t channels = 3;
  ClassCounts classes{3, 3, 9};

  void validate() const;
};

class ToyGsfModel final : public VideoModel {
 public:
  explicit ToyGsfModel(ToyBackboneConfig cfg);

  const ToyBackboneConfig& config() const { return cfg_; }

  std::string name() const override { return cfg_.use_gsf ? "gsf" : "plain2d"; }
  ParamStore init_params(std::uint64_t seed) const override;
  ScoreVars forward(const Tensor& clip, const BoundParams& params) const override;

  std::size_t frames() const override { return cfg_.frames; }
  std::size_t input_height() const override { return cfg_.input_h; }
  std::size_t input_width() const override { return cfg_.input_w; }
  ClassCounts classes() const override { return cfg_.classes; }

 private:
  ToyBackboneConfig cfg_;
};

PredictionScores toy_backbone_forward(const Tensor& clip, const ToyBackboneConfig& cfg, const ParamStore& params);

}  // namespace vidrec
