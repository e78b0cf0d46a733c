#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vidrec/heads.hpp"
#include "vidrec/tensor.hpp"

namespace vidrec {

// A decoded video: frames [L x C x H x W].
struct Video {
  std::string id;
  Tensor frames;

  std::size_t length() const { return frames.dim(0); }
};

enum class SamplingMode { kUniformCenter, kJittered };

struct SamplingSpec {
  std::size_t frames = 16;
  SamplingMode mode = SamplingMode::kUniformCenter;
  std::uint64_t seed = 0;
};

struct ViewSpec {
  std::size_t clips_per_video = 2;
  std::size_t crops_per_frame = 3;
  std::size_t crop_side = 224;

  std::size_t total() const { return clips_per_video * crops_per_frame; }
};

// Centers of n equal segments: floor((i + 0.5) * L / n), clamped to [0, L-1].
std::vector<std::size_t> uniform_sample(std::size_t video_length, std::size_t n);

// One uniformly drawn index per segment [floor(i*L/n), floor((i+1)*L/n));
// an empty segment yields its start clamped to [0, L-1].
std::vector<std::size_t> temporal_jitter(std::size_t video_length, std::size_t n, std::mt19937_64& rng);
std::vector<std::size_t> temporal_jitter(std::size_t video_length, std::size_t n, std::uint64_t seed);

// Bilinear resize of [C x H x W] (half-pixel centers).
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

// Resizes the short side to `side`, then takes side x side crops at the
// start, middle and end of the long side (left/center/right for landscape,
// top/center/bottom for portrait).
std::array<Tensor, 3> three_crops(const Tensor& frame, std::size_t side);

// Crops every frame of a [T x C x H x W] clip; crop index 0, 1 or 2.
Tensor crop_clip(const Tensor& clip, std::size_t side, std::size_t crop_index);

// Frames [T x C x H x W] at the given indices.
Tensor select_frames(const Tensor& frames, std::span<const std::size_t> indices);

// Frame window [begin, end) of temporal clip `clip` out of `clips`.
std::pair<std::size_t, std::size_t> clip_window(std::size_t video_length, std::size_t clip, std::size_t clips);

// clips_per_video temporal clips, each sampled inside its own equal window of
// the video, times crops_per_frame spatial crops. Clip-major order.
std::vector<Tensor> generate_views(const Video& video, const ViewSpec& views, const SamplingSpec& sampling);

// Video-level scores: ensemble_average over exactly views.total() view scores.
PredictionScores aggregate_views(std::span<const PredictionScores> view_scores, const ViewSpec& views);

}  // namespace vidrec
