#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vidrec/metrics.hpp"
#include "vidrec/model.hpp"
#include "vidrec/params.hpp"
#include "vidrec/sampling.hpp"
#include "vidrec/synth.hpp"

namespace vidrec {

struct TrainSpec {
  double base_lr = 0.01;
  double momentum = 0.9;
  std::size_t batch = 32;
  std::size_t epochs = 60;
  std::size_t warmup_epochs = 5;

  // Full-scale settings: GSF lr 0.01, batch 32, 60 epochs; XViT lr 0.05,
  // batch 128, 50 epochs; both SGD momentum 0.9 with cosine decay after a
  // linear warmup.
  static TrainSpec gsf_preset();
  static TrainSpec xvit_preset();

  void validate() const;
};

// Linear warmup from 0 to base_lr over `warmup_steps`, then half-cosine decay
// reaching 0 at the last step (total_steps - 1).
class CosineWarmupSchedule {
 public:
  CosineWarmupSchedule(double base_lr, std::size_t warmup_steps, std::size_t total_steps);
  double lr(std::size_t step) const;
  std::size_t total_steps() const { return total_; }

 private:
  double base_;
  std::size_t warmup_;
  std::size_t total_;
};

// velocity = momentum * velocity + grad; param -= lr * velocity
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}
  void step(ParamStore& params, const std::vector<Tensor>& grads, double lr);

 private:
  double momentum_;
  std::vector<Tensor> velocity_;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(std::size_t epoch)
      : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double action_top1 = 0.0;  // on the training clips seen this epoch
  double lr = 0.0;           // at the epoch's last step
};

struct TrainResult {
  ParamStore params;
  std::vector<EpochRecord> history;
  std::vector<double> lr_trace;  // one entry per optimizer step
};

// One training clip: a temporally jittered sample inside a randomly chosen
// test-clip window, under a randomly chosen crop.
Tensor training_clip(const Video& video, const VideoModel& model, const ViewSpec& views, std::mt19937_64& rng);

// Minibatch SGD with momentum on the multitask loss. Deterministic in `seed`.
TrainResult train_toy(const VideoModel& model, const VideoDataset& data, const TrainSpec& spec, const ViewSpec& views,
                      std::uint64_t seed);
// Continues from given parameters.
TrainResult train_toy(const VideoModel& model, ParamStore init, const VideoDataset& data, const TrainSpec& spec,
                      const ViewSpec& views, std::uint64_t seed);

// Video-level normalized scores: every test view through the model, then
// aggregate_views.
std::vector<PredictionScores> predict_videos(const VideoModel& model, const ParamStore& params,
                                             const VideoDataset& data, const ViewSpec& views);

std::vector<TaskLabels> dataset_labels(const VideoDataset& data);

}  // namespace vidrec
