#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include "vidrec/gsf.hpp"
#include "vidrec/sampling.hpp"
#include "vidrec/synth.hpp"
#include "vidrec/train.hpp"
#include "vidrec/xvit.hpp"

namespace vidrec {

struct SynthDataConfig {
  std::size_t verbs = 3;
  std::size_t nouns = 3;
  std::size_t train_per_class = 12;
  std::size_t test_per_class = 6;
  std::size_t height = 32;
  std::size_t width = 40;
  std::size_t object_size = 12;
  double noise = 0.2;

  SynthSpec train_spec(std::uint64_t seed) const;
  SynthSpec test_spec(std::uint64_t seed) const;
};

// Harness configuration. The JSON form has exactly the sections
//   model     { "xvit": {...}, "gsf": {...} }
//   sampling  { "frames" }
//   views     { "clips", "crops", "crop_side" }
//   train     { "gsf": TrainSpec, "xvit": TrainSpec, "data": SynthDataConfig }
//   ensemble  { "members": [...] }
// and unknown keys anywhere are rejected. Missing keys keep their defaults.
// sampling.frames and views.crop_side override the models' frames and input
// size; the data section fixes their class counts.
struct HarnessConfig {
  XViTConfig xvit;
  ToyBackboneConfig gsf{{8, 16}};
  SamplingSpec sampling{8, SamplingMode::kUniformCenter, 0};
  ViewSpec views{2, 3, 32};
  TrainSpec gsf_train{0.05, 0.9, 2, 24, 1};
  TrainSpec xvit_train{0.02, 0.9, 2, 60, 3};
  SynthDataConfig data;
  std::vector<std::string> members{"gsf", "xvit"};

  // Desk-scale defaults: the learning rates, batches and epochs above are the
  // toy override of TrainSpec::gsf_preset() / xvit_preset().
  static HarnessConfig toy_default();

  static HarnessConfig from_json_text(const std::string& text);
  static HarnessConfig load(std::istream& in);
  std::string to_json_text() const;

  // Propagates the shared fields into the model configs and validates.
  void finalize();
};

}  // namespace vidrec
