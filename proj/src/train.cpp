#include "vidrec/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace vidrec {

TrainSpec TrainSpec::gsf_preset() { return {0.01, 0.9, 32, 60, 5}; }
TrainSpec TrainSpec::xvit_preset() { return {0.05, 0.9, 128, 50, 5}; }

void TrainSpec::validate() const {
  if (base_lr < 0.0) throw std::invalid_argument("train: base_lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (batch < 1 || epochs < 1) throw std::invalid_argument("train: batch and epochs must be >= 1");
  if (warmup_epochs >= epochs) throw std::invalid_argument("train: warmup must be shorter than training");
}

CosineWarmupSchedule::CosineWarmupSchedule(double base_lr, std::size_t warmup_steps, std::size_t total_steps)
    : base_(base_lr), warmup_(warmup_steps), total_(total_steps) {
  if (base_lr < 0.0) throw std::invalid_argument("schedule: base lr must be >= 0");
  if (total_steps < 1 || warmup_steps >= total_steps) {
    throw std::invalid_argument("schedule: warmup (" + std::to_string(warmup_steps) + ") must be shorter than " +
                                std::to_string(total_steps) + " total steps");
  }
}

double CosineWarmupSchedule::lr(std::size_t step) const {
  if (step >= total_) throw std::out_of_range("schedule step past the end of training");
  if (step < warmup_) return base_ * static_cast<double>(step) / static_cast<double>(warmup_);
  const std::size_t span = total_ - 1 - warmup_;
  if (span == 0) return base_;
  const double progress = static_cast<double>(step - warmup_) / static_cast<double>(span);
  return base_ * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void SgdMomentum::step(ParamStore& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size()) throw std::invalid_argument("sgd: one gradient per parameter expected");
  if (velocity_.empty()) {
    for (const Tensor& g : grads) velocity_.emplace_back(g.shape());
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor& p = params.get(params.names()[i]);
    Tensor& v = velocity_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = momentum_ * v[j] + grads[i][j];
      p[j] -= lr * v[j];
    }
  }
}

Tensor training_clip(const Video& video, const VideoModel& model, const ViewSpec& views, std::mt19937_64& rng) {
  const std::size_t clip = std::uniform_int_distribution<std::size_t>(0, views.clips_per_video - 1)(rng);
  const auto [begin, end] = clip_window(video.length(), clip, views.clips_per_video);
  std::vector<std::size_t> idx = temporal_jitter(end - begin, model.frames(), rng);
  for (std::size_t& i : idx) i += begin;
  const std::size_t crop = std::uniform_int_distribution<std::size_t>(0, views.crops_per_frame - 1)(rng);
  return crop_clip(select_frames(video.frames, idx), model.input_height(), crop);
}

TrainResult train_toy(const VideoModel& model, const VideoDataset& data, const TrainSpec& spec, const ViewSpec& views,
                      std::uint64_t seed) {
  return train_toy(model, model.init_params(seed), data, spec, views, seed);
}

TrainResult train_toy(const VideoModel& model, ParamStore init, const VideoDataset& data, const TrainSpec& spec,
                      const ViewSpec& views, std::uint64_t seed) {
  spec.validate();
  if (data.items.empty()) throw std::invalid_argument("train: empty dataset");
  if (model.input_height() != model.input_width()) throw std::invalid_argument("train: model input must be square");

  const std::size_t n = data.items.size();
  const std::size_t steps_per_epoch = (n + spec.batch - 1) / spec.batch;
  const CosineWarmupSchedule schedule(spec.base_lr, spec.warmup_epochs * steps_per_epoch, spec.epochs * steps_per_epoch);
  SgdMomentum optimizer(spec.momentum);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult result{std::move(init), {}, {}};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t first = 0; first < n; first += spec.batch) {
      const std::size_t last = std::min(n, first + spec.batch);
      std::vector<Tensor> grads;
      for (const std::string& name : result.params.names()) grads.emplace_back(result.params.get(name).shape());
      for (std::size_t i = first; i < last; ++i) {
        const LabeledVideo& item = data.items[order[i]];
        const Tensor clip = training_clip(item.video, model, views, rng);
        Tape tape;
        const BoundParams params = BoundParams::watched(result.params, tape);
        const ScoreVars scores = model.forward(clip, params);
        const Var loss = multitask_loss(scores, item.labels);
        const double value = loss.value().item();
        if (!std::isfinite(value)) throw TrainingDiverged(epoch);
        loss_sum += value;
        if (item.labels.action && label_rank(scores.action.value(), *item.labels.action) == 0) ++correct;
        const Gradients g = tape.backward(loss, params.vars());
        for (std::size_t k = 0; k < grads.size(); ++k) {
          for (std::size_t j = 0; j < grads[k].size(); ++j) grads[k][j] += g.grads[k][j];
        }
      }
      const double inv = 1.0 / static_cast<double>(last - first);
      for (Tensor& g : grads) {
        for (double& v : g.data()) v *= inv;
      }
      const double lr = schedule.lr(step++);
      result.lr_trace.push_back(lr);
      optimizer.step(result.params, grads, lr);
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(n),
                              100.0 * static_cast<double>(correct) / static_cast<double>(n), result.lr_trace.back()});
  }
  return result;
}

std::vector<PredictionScores> predict_videos(const VideoModel& model, const ParamStore& params,
                                             const VideoDataset& data, const ViewSpec& views) {
  if (model.input_height() != views.crop_side || model.input_width() != views.crop_side) {
    throw std::invalid_argument("view crop side does not match the model input");
  }
  const SamplingSpec sampling{model.frames(), SamplingMode::kUniformCenter, 0};
  const BoundParams bound = BoundParams::constants(params);
  std::vector<PredictionScores> out;
  out.reserve(data.items.size());
  for (const LabeledVideo& item : data.items) {
    std::vector<PredictionScores> per_view;
    for (const Tensor& clip : generate_views(item.video, views, sampling)) {
      per_view.push_back(model.forward(clip, bound).values());
    }
    out.push_back(aggregate_views(per_view, views));
  }
  return out;
}

std::vector<TaskLabels> dataset_labels(const VideoDataset& data) {
  std::vector<TaskLabels> labels;
  labels.reserve(data.items.size());
  for (const LabeledVideo& item : data.items) labels.push_back(item.labels);
  return labels;
}

}  // namespace vidrec
