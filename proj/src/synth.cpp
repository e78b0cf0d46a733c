#include "vidrec/synth.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace vidrec {

void SynthSpec::validate() const {
  if (verbs < 1 || verbs > 3) throw std::invalid_argument("synth: 1 to 3 verbs supported");
  if (nouns < 1 || nouns > 4) throw std::invalid_argument("synth: 1 to 4 nouns supported");
  if (samples_per_class < 1) throw std::invalid_argument("synth: samples_per_class must be >= 1");
  if (object_size < 4 || object_size + 4 > height || object_size > width) {
    throw std::invalid_argument("synth: object does not fit the frame");
  }
  if (width % 3 == 0) throw std::invalid_argument("synth: width must be coprime with 3");
  if (noise < 0.0) throw std::invalid_argument("synth: noise must be non-negative");
}

namespace {

// Noun shapes inside the K x K footprint; bars cover the middle third.
bool shape_mask(std::size_t noun, std::size_t y, std::size_t x, std::size_t K) {
  const std::size_t lo = K / 3, hi = K - K / 3;
  switch (noun) {
    case 0:  // filled square
      return true;
    case 1:  // horizontal bar
      return y >= lo && y < hi;
    case 2:  // vertical bar
      return x >= lo && x < hi;
    default:  // diagonal cross
      return y == x || y + 1 == x || x + 1 == y || y + x == K - 1 || y + x == K || y + x + 2 == K;
  }
}

long velocity(std::size_t verb) {
  switch (verb) {
    case 0:
      return 1;
    case 1:
      return -1;
    default:
      return 3;
  }
}

}  // namespace

VideoDataset synth_videos(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t L = spec.length(), H = spec.height, W = spec.width, K = spec.object_size;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t v = 0; v < spec.verbs; ++v) {
    for (std::size_t n = 0; n < spec.nouns; ++n) pairs.emplace_back(v, n);
  }
  VideoDataset data{{}, ActionVocab::build(pairs, spec.verbs, spec.nouns)};

  std::size_t serial = 0;
  for (const auto& [verb, noun] : pairs) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      Tensor frames(Shape{L, 3, H, W});
      double background[3], color[3];
      for (int c = 0; c < 3; ++c) {
        background[c] = -1.0 + 0.6 * unit(rng);
        color[c] = 0.4 + 0.6 * unit(rng);
      }
      const auto x0 = static_cast<long>(std::uniform_int_distribution<std::size_t>(0, W - 1)(rng));
      const std::size_t y0 = std::uniform_int_distribution<std::size_t>(2, H - K - 2)(rng);
      const long vel = velocity(verb);
      for (std::size_t t = 0; t < L; ++t) {
        const long x_left = ((x0 + vel * static_cast<long>(t)) % static_cast<long>(W) + static_cast<long>(W)) %
                            static_cast<long>(W);
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) frames.at({t, c, y, x}) = background[c];
          }
          for (std::size_t dy = 0; dy < K; ++dy) {
            for (std::size_t dx = 0; dx < K; ++dx) {
              if (!shape_mask(noun, dy, dx, K)) continue;
              const std::size_t x = (static_cast<std::size_t>(x_left) + dx) % W;
              frames.at({t, c, y0 + dy, x}) = color[c];
            }
          }
        }
      }
      if (spec.noise > 0.0) {
        for (double& p : frames.data()) p += spec.noise * gauss(rng);
      }
      LabeledVideo item{Video{"vid" + std::to_string(serial++), std::move(frames)},
                        data.vocab.labels(verb, noun)};
      data.items.push_back(std::move(item));
    }
  }
  return data;
}

VideoDataset shuffle_frames(const VideoDataset& data, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VideoDataset out{{}, data.vocab};
  out.items.reserve(data.items.size());
  for (const LabeledVideo& item : data.items) {
    std::vector<std::size_t> order(item.video.length());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    out.items.push_back({Video{item.video.id, select_frames(item.video.frames, order)}, item.labels});
  }
  return out;
}

std::vector<Annotation> dataset_annotations(const VideoDataset& data) {
  std::vector<Annotation> rows;
  rows.reserve(data.items.size());
  for (const LabeledVideo& item : data.items) rows.push_back({item.video.id, item.labels.verb, item.labels.noun});
  return rows;
}

}  // namespace vidrec
