#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "vidrec/heads.hpp"
#include "vidrec/params.hpp"
#include "vidrec/tensor.hpp"

namespace vidrec {

// A clip classifier: [T x C x H x W] clip in, verb/noun/action logits out.
class VideoModel {
 public:
  virtual ~VideoModel() = default;

  virtual std::string name() const = 0;
  virtual ParamStore init_params(std::uint64_t seed) const = 0;
  virtual ScoreVars forward(const Tensor& clip, const BoundParams& params) const = 0;

  virtual std::size_t frames() const = 0;
  virtual std::size_t input_height() const = 0;
  virtual std::size_t input_width() const = 0;
  virtual ClassCounts classes() const = 0;

  PredictionScores predict(const Tensor& clip, const ParamStore& params) const {
    return forward(clip, BoundParams::constants(params)).values();
  }
};

}  // namespace vidrec
