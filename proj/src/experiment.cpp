#include "vidrec/experiment.hpp"

#include <stdexcept>

#include "vidrec/gsf.hpp"
#include "vidrec/xvit.hpp"

namespace vidrec {

std::unique_ptr<VideoModel> make_model(const std::string& name, const HarnessConfig& cfg) {
  if (name == "xvit") return std::make_unique<XViTModel>(cfg.xvit);
  if (name == "gsf" || name == "plain2d") {
    ToyBackboneConfig b = cfg.gsf;
    b.use_gsf = name == "gsf";
    return std::make_unique<ToyGsfModel>(b);
  }
  throw std::invalid_argument("unknown model '" + name + "' (expected gsf, plain2d or xvit)");
}

const TrainSpec& train_spec_for(const std::string& name, const HarnessConfig& cfg) {
  return name == "xvit" ? cfg.xvit_train : cfg.gsf_train;
}

MemberOutcome train_and_score(const VideoModel& model, const VideoDataset& train, const VideoDataset& test,
                              const TrainSpec& spec, const ViewSpec& views, std::uint64_t seed) {
  MemberOutcome out{model.name(), train_toy(model, train, spec, views, seed), {}, {}};
  out.scores = predict_videos(model, out.training.params, test, views);
  out.report = evaluate(out.scores, dataset_labels(test));
  return out;
}

SyntheticData make_synthetic_data(const HarnessConfig& cfg, std::uint64_t seed) {
  return {synth_videos(cfg.data.train_spec(seed)), synth_videos(cfg.data.test_spec(seed))};
}

MemberOutcome train_on_synthetic(const HarnessConfig& cfg, const std::string& model, std::uint64_t data_seed,
                                 std::uint64_t train_seed, bool shuffled) {
  SyntheticData data = make_synthetic_data(cfg, data_seed);
  if (shuffled) {
    data.train = shuffle_frames(data.train, data_seed + 17);
    data.test = shuffle_frames(data.test, data_seed + 18);
  }
  const auto m = make_model(model, cfg);
  return train_and_score(*m, data.train, data.test, train_spec_for(model, cfg), cfg.views, train_seed);
}

std::uint64_t member_seed(std::uint64_t seed, std::size_t index) { return seed + 1000 * (index + 1); }

EvalOutcome run_synthetic_eval(const HarnessConfig& cfg, std::uint64_t seed) {
  const SyntheticData data = make_synthetic_data(cfg, seed);
  EvalOutcome out;
  for (const LabeledVideo& item : data.test.items) out.video_ids.push_back(item.video.id);
  out.labels = dataset_labels(data.test);
  for (std::size_t i = 0; i < cfg.members.size(); ++i) {
    const auto model = make_model(cfg.members[i], cfg);
    out.members.push_back(
        train_and_score(*model, data.train, data.test, train_spec_for(cfg.members[i], cfg), cfg.views, member_seed(seed, i)));
  }
  for (std::size_t v = 0; v < out.video_ids.size(); ++v) {
    std::vector<PredictionScores> per_member;
    for (const MemberOutcome& m : out.members) per_member.push_back(m.scores[v]);
    out.ensemble_scores.push_back(average_normalized(per_member));
  }
  out.ensemble = evaluate(out.ensemble_scores, out.labels);
  return out;
}

}  // namespace vidrec
