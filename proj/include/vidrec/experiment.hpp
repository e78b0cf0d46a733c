#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vidrec/config.hpp"
#include "vidrec/metrics.hpp"
#include "vidrec/train.hpp"

namespace vidrec {

// "gsf", "plain2d" or "xvit" built from the harness config.
std::unique_ptr<VideoModel> make_model(const std::string& name, const HarnessConfig& cfg);
const TrainSpec& train_spec_for(const std::string& name, const HarnessConfig& cfg);

struct MemberOutcome {
  std::string name;
  TrainResult training;
  std::vector<PredictionScores> scores;  // normalized, one per test video
  MetricReport report;
};

MemberOutcome train_and_score(const VideoModel& model, const VideoDataset& train, const VideoDataset& test,
                              const TrainSpec& spec, const ViewSpec& views, std::uint64_t seed);

struct SyntheticData {
  VideoDataset train;
  VideoDataset test;
};

SyntheticData make_synthetic_data(const HarnessConfig& cfg, std::uint64_t seed);

// Trains one model on the synthetic split drawn from `data_seed` and scores
// its test split. With `shuffled`, both splits have their frames reordered
// first, so only order-blind cues remain.
MemberOutcome train_on_synthetic(const HarnessConfig& cfg, const std::string& model, std::uint64_t data_seed,
                                 std::uint64_t train_seed, bool shuffled);

// Training seed of ensemble member `index` in run_synthetic_eval.
std::uint64_t member_seed(std::uint64_t seed, std::size_t index);

struct EvalOutcome {
  std::vector<std::string> video_ids;
  std::vector<TaskLabels> labels;
  std::vector<MemberOutcome> members;
  std::vector<PredictionScores> ensemble_scores;
  MetricReport ensemble;
};

// Trains every configured ensemble member on the synthetic train split,
// scores the test split through the view protocol and averages the members.
EvalOutcome run_synthetic_eval(const HarnessConfig& cfg, std::uint64_t seed);

}  // namespace vidrec
