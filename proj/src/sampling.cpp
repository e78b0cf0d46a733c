#include "vidrec/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vidrec {

namespace {

void check_sampling_args(std::size_t video_length, std::size_t n) {
  if (video_length < 1) throw std::invalid_argument("video length must be >= 1");
  if (n < 1) throw std::invalid_argument("number of sampled frames must be >= 1");
}

}  // namespace

std::vector<std::size_t> uniform_sample(std::size_t video_length, std::size_t n) {
  check_sampling_args(video_length, n);
  std::vector<std::size_t> out(n);
  const double step = static_cast<double>(video_length) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(std::floor((static_cast<double>(i) + 0.5) * step));
    out[i] = std::min(idx, video_length - 1);
  }
  return out;
}

std::vector<std::size_t> temporal_jitter(std::size_t video_length, std::size_t n, std::mt19937_64& rng) {
  check_sampling_args(video_length, n);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = i * video_length / n;
    const std::size_t end = (i + 1) * video_length / n;
    if (end <= begin) {
      out[i] = std::min(begin, video_length - 1);
    } else {
      std::uniform_int_distribution<std::size_t> pick(begin, end - 1);
      out[i] = pick(rng);
    }
  }
  return out;
}

std::vector<std::size_t> temporal_jitter(std::size_t video_length, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return temporal_jitter(video_length, n, rng);
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw std::invalid_argument("resize expects [C x H x W], got " + shape_str(image.shape()));
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (out_h == H && out_w == W) return image;
  Tensor out(Shape{C, out_h, out_w});
  auto source = [](std::size_t dst, std::size_t in, std::size_t outn) {
    const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source(y, H, out_h);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = source(x, W, out_w);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < C; ++c) {
        const double top = (1 - fx) * image.at({c, y0, x0}) + fx * image.at({c, y0, x1});
        const double bottom = (1 - fx) * image.at({c, y1, x0}) + fx * image.at({c, y1, x1});
        out.at({c, y, x}) = (1 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

namespace {

struct CropGeometry {
  std::size_t resized_h, resized_w;
  std::array<std::size_t, 3> y0, x0;
};

CropGeometry crop_geometry(std::size_t H, std::size_t W, std::size_t side) {
  if (side == 0) throw std::invalid_argument("crop side must be positive");
  CropGeometry g{};
  if (H <= W) {
    g.resized_h = side;
    g.resized_w = std::max(side, static_cast<std::size_t>(std::lround(static_cast<double>(W) * side / H)));
    const std::size_t slack = g.resized_w - side;
    g.x0 = {0, slack / 2, slack};
    g.y0 = {0, 0, 0};
  } else {
    g.resized_w = side;
    g.resized_h = std::max(side, static_cast<std::size_t>(std::lround(static_cast<double>(H) * side / W)));
    const std::size_t slack = g.resized_h - side;
    g.y0 = {0, slack / 2, slack};
    g.x0 = {0, 0, 0};
  }
  return g;
}

Tensor slice(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t side) {
  const std::size_t C = image.dim(0);
  Tensor out(Shape{C, side, side});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) out.at({c, y, x}) = image.at({c, y0 + y, x0 + x});
    }
  }
  return out;
}

}  // namespace

std::array<Tensor, 3> three_crops(const Tensor& frame, std::size_t side) {
  if (frame.rank() != 3) throw std::invalid_argument("three_crops expects [C x H x W], got " + shape_str(frame.shape()));
  const CropGeometry g = crop_geometry(frame.dim(1), frame.dim(2), side);
  const Tensor resized = resize_bilinear(frame, g.resized_h, g.resized_w);
  return {slice(resized, g.y0[0], g.x0[0], side), slice(resized, g.y0[1], g.x0[1], side),
          slice(resized, g.y0[2], g.x0[2], side)};
}

Tensor crop_clip(const Tensor& clip, std::size_t side, std::size_t crop_index) {
  if (clip.rank() != 4) throw std::invalid_argument("crop_clip expects [T x C x H x W], got " + shape_str(clip.shape()));
  if (crop_index >= 3) throw std::out_of_range("crop index must be 0, 1 or 2");
  const std::size_t T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
  const CropGeometry g = crop_geometry(H, W, side);
  Tensor out(Shape{T, C, side, side});
  const std::size_t in_frame = C * H * W, out_frame = C * side * side;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor frame(Shape{C, H, W},
                 std::vector<double>(clip.data().begin() + t * in_frame, clip.data().begin() + (t + 1) * in_frame));
    const Tensor crop = slice(resize_bilinear(frame, g.resized_h, g.resized_w), g.y0[crop_index], g.x0[crop_index], side);
    std::copy(crop.data().begin(), crop.data().end(), out.data().begin() + t * out_frame);
  }
  return out;
}

Tensor select_frames(const Tensor& frames, std::span<const std::size_t> indices) {
  if (frames.rank() != 4) throw std::invalid_argument("select_frames expects [L x C x H x W]");
  if (indices.empty()) throw std::invalid_argument("select_frames needs at least one index");
  const std::size_t frame = frames.size() / frames.dim(0);
  Shape shape = frames.shape();
  shape[0] = indices.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= frames.dim(0)) throw std::out_of_range("frame index out of range");
    std::copy_n(frames.data().begin() + indices[i] * frame, frame, out.data().begin() + i * frame);
  }
  return out;
}

std::pair<std::size_t, std::size_t> clip_window(std::size_t video_length, std::size_t clip, std::size_t clips) {
  if (video_length == 0 || clips == 0 || clip >= clips) throw std::invalid_argument("bad clip window request");
  std::size_t begin = clip * video_length / clips;
  std::size_t end = (clip + 1) * video_length / clips;
  if (end <= begin) {
    begin = std::min(begin, video_length - 1);
    end = begin + 1;
  }
  return {begin, end};
}

std::vector<Tensor> generate_views(const Video& video, const ViewSpec& views, const SamplingSpec& sampling) {
  if (video.frames.rank() != 4) throw std::invalid_argument("video frames must be [L x C x H x W]");
  if (views.crops_per_frame != 3) throw std::invalid_argument("only three crops per frame are supported");
  std::vector<Tensor> out;
  out.reserve(views.total());
  std::mt19937_64 rng(sampling.seed);
  for (std::size_t c = 0; c < views.clips_per_video; ++c) {
    const auto [begin, end] = clip_window(video.length(), c, views.clips_per_video);
    std::vector<std::size_t> idx = sampling.mode == SamplingMode::kJittered
                                       ? temporal_jitter(end - begin, sampling.frames, rng)
                                       : uniform_sample(end - begin, sampling.frames);
    for (std::size_t& i : idx) i += begin;
    const Tensor clip = select_frames(video.frames, idx);
    for (std::size_t k = 0; k < views.crops_per_frame; ++k) out.push_back(crop_clip(clip, views.crop_side, k));
  }
  return out;
}

PredictionScores aggregate_views(std::span<const PredictionScores> view_scores, const ViewSpec& views) {
  if (view_scores.size() != views.total()) {
    throw std::invalid_argument("expected " + std::to_string(views.total()) + " view scores, got " +
                                std::to_string(view_scores.size()));
  }
  return ensemble_average(view_scores);
}

}  // namespace vidrec
