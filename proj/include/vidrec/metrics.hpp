#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vidrec/heads.hpp"
#include "vidrec/tensor.hpp"

namespace vidrec {

// Rank of `label` in `scores`: classes scoring higher, or equal with a lower
// index, come first.
std::size_t label_rank(const Tensor& scores, std::size_t label);

// Percentage of samples whose label is among the k best-ranked classes.
// A missing label counts as a miss.
double topk_accuracy(std::span<const Tensor> scores, std::span<const std::optional<std::size_t>> labels, std::size_t k);
double topk_accuracy(std::span<const Tensor> scores, std::span<const std::size_t> labels, std::size_t k);

enum Task : std::size_t { kVerb = 0, kNoun = 1, kAction = 2 };
constexpr std::array<const char*, 3> kTaskNames{"verb", "noun", "action"};

struct MetricReport {
  std::array<double, 3> top1{};
  std::array<double, 3> top5{};
};

MetricReport evaluate(std::span<const PredictionScores> predictions, std::span<const TaskLabels> labels);

// `task,top1,top5` rows.
std::string metrics_csv(const MetricReport& report);

// Method | Verb | Noun | Action table with `top1 (top5)` cells.
std::string metrics_table(std::span<const std::pair<std::string, MetricReport>> rows);

}  // namespace vidrec
