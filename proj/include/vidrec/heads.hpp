#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vidrec/autograd.hpp"
#include "vidrec/params.hpp"
#include "vidrec/tensor.hpp"

namespace vidrec {

struct ClassCounts {
  std::size_t verbs = 0;
  std::size_t nouns = 0;
  std::size_t actions = 0;

  bool operator==(const ClassCounts&) const = default;
};

// Verb/noun/action scores for one view, clip or video.
struct PredictionScores {
  Tensor verb;
  Tensor noun;
  Tensor action;

  ClassCounts counts() const { return {verb.size(), noun.size(), action.size()}; }
};

struct ScoreVars {
  Var verb;
  Var noun;
  Var action;

  PredictionScores values() const { return {verb.value(), noun.value(), action.value()}; }
};

struct TaskLabels {
  std::size_t verb = 0;
  std::size_t noun = 0;
  std::optional<std::size_t> action;  // absent for verb-noun pairs outside the vocabulary
};

// Action classes are the distinct (verb, noun) pairs of the training
// annotations, numbered in first-seen order.
class ActionVocab {
 public:
  static ActionVocab build(std::span<const std::pair<std::size_t, std::size_t>> annotations, std::size_t verbs,
                           std::size_t nouns);

  std::size_t verbs() const { return verbs_; }
  std::size_t nouns() const { return nouns_; }
  std::size_t actions() const { return pairs_.size(); }
  ClassCounts counts() const { return {verbs_, nouns_, actions()}; }

  std::optional<std::size_t> compose(std::size_t verb, std::size_t noun) const;
  std::pair<std::size_t, std::size_t> decompose(std::size_t action) const;
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const { return pairs_; }

  TaskLabels labels(std::size_t verb, std::size_t noun) const { return {verb, noun, compose(verb, noun)}; }

 private:
  std::size_t verbs_ = 0;
  std::size_t nouns_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_to_action_;
};

// Adds `<prefix>.{verb,noun,action}.{w,b}` for three affine maps D -> classes.
void add_head_params(ParamStore& store, const std::string& prefix, std::size_t feature_dim, const ClassCounts& counts,
                     std::mt19937_64& rng);

ScoreVars multitask_heads(const Var& feature, const BoundParams& params, const std::string& prefix = "head");
PredictionScores multitask_heads(const Tensor& feature, const ParamStore& params, const std::string& prefix = "head");

// Unweighted sum of the three softmax cross-entropies. A missing action
// label drops the action term.
Var multitask_loss(const ScoreVars& scores, const TaskLabels& target);
double multitask_loss(const PredictionScores& scores, const TaskLabels& target);

PredictionScores softmax_scores(const PredictionScores& logits);

// Per task and class, the mean of the members' softmax-normalized scores.
// Operands are summed in sorted order with a balanced pairwise tree, so the
// result does not depend on member order.
PredictionScores ensemble_average(std::span<const PredictionScores> members);
// Same reduction over members whose scores are already normalized.
PredictionScores average_normalized(std::span<const PredictionScores> members);

double pairwise_sum(std::vector<double> values);

// --- file formats ---------------------------------------------------------

struct Annotation {
  std::string segment_id;
  std::size_t verb = 0;
  std::size_t noun = 0;
};

// `segment_id,verb_id,noun_id` with a header row.
std::vector<Annotation> read_annotations(std::istream& in);
void write_annotations(std::ostream& out, std::span<const Annotation> rows);

using ScoreRow = std::pair<std::string, PredictionScores>;

// Header `segment_id,v0..,n0..,a0..` then one row per segment, %.9g values.
void write_scores(std::ostream& out, std::span<const ScoreRow> rows);
std::vector<ScoreRow> read_scores(std::istream& in);

}  // namespace vidrec
