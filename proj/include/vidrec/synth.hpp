#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vidrec/heads.hpp"
#include "vidrec/sampling.hpp"

namespace vidrec {

// Synthetic verb/noun videos. The noun is the shape of a single object
// (filled square, horizontal bar, vertical bar, diagonal cross); the verb is
// how it travels around a horizontally wrapping frame: 1 px/frame right, 1 px/frame left,
// or 3 px/frame right. Videos last `width` frames, so every verb visits each
// horizontal position exactly once and the set of frames of a video carries
// no verb information; only their order does. Pixel values are zero-centred:
// background in [-1, -0.4], object in [0.4, 1] per channel, plus Gaussian
// noise.
struct SynthSpec {
  std::size_t verbs = 3;
  std::size_t nouns = 3;
  std::size_t samples_per_class = 10;
  std::uint64_t seed = 0;
  std::size_t height = 32;
  std::size_t width = 40;
  std::size_t object_size = 8;
  double noise = 0.2;

  std::size_t length() const { return width; }
  void validate() const;
};

struct LabeledVideo {
  Video video;
  TaskLabels labels;
};

struct VideoDataset {
  std::vector<LabeledVideo> items;
  ActionVocab vocab;
};

// samples_per_class videos for every (verb, noun) pair; action ids follow
// verb-major pair order.
VideoDataset synth_videos(const SynthSpec& spec);

// Same videos with each one's frames in a seeded random order.
VideoDataset shuffle_frames(const VideoDataset& data, std::uint64_t seed);

std::vector<Annotation> dataset_annotations(const VideoDataset& data);

}  // namespace vidrec
