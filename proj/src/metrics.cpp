#include "vidrec/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vidrec {

std::size_t label_rank(const Tensor& scores, std::size_t label) {
  if (label >= scores.size()) throw std::out_of_range("label " + std::to_string(label) + " outside score vector");
  const double ref = scores[label];
  std::size_t rank = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (scores[c] > ref || (scores[c] == ref && c < label)) ++rank;
  }
  return rank;
}

double topk_accuracy(std::span<const Tensor> scores, std::span<const std::optional<std::size_t>> labels,
                     std::size_t k) {
  if (scores.empty()) throw std::invalid_argument("top-k accuracy of an empty prediction list");
  if (scores.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] && label_rank(scores[i], *labels[i]) < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

double topk_accuracy(std::span<const Tensor> scores, std::span<const std::size_t> labels, std::size_t k) {
  std::vector<std::optional<std::size_t>> wrapped(labels.begin(), labels.end());
  return topk_accuracy(scores, wrapped, k);
}

MetricReport evaluate(std::span<const PredictionScores> predictions, std::span<const TaskLabels> labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
  MetricReport report;
  for (std::size_t task = 0; task < 3; ++task) {
    std::vector<Tensor> scores;
    std::vector<std::optional<std::size_t>> truth;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      const PredictionScores& p = predictions[i];
      scores.push_back(task == kVerb ? p.verb : task == kNoun ? p.noun : p.action);
      truth.push_back(task == kVerb   ? std::optional<std::size_t>(labels[i].verb)
                      : task == kNoun ? std::optional<std::size_t>(labels[i].noun)
                                      : labels[i].action);
    }
    report.top1[task] = topk_accuracy(scores, truth, 1);
    report.top5[task] = topk_accuracy(scores, truth, 5);
  }
  return report;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string metrics_csv(const MetricReport& report) {
  std::string out = "task,top1,top5\n";
  for (std::size_t t = 0; t < 3; ++t) out += std::string(kTaskNames[t]) + "," + fixed(report.top1[t]) + "," + fixed(report.top5[t]) + "\n";
  return out;
}

std::string metrics_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  std::size_t name_width = 6;
  for (const auto& r : rows) name_width = std::max(name_width, r.first.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  constexpr std::size_t kCell = 16;
  std::ostringstream out;
  out << pad("Method", name_width) << " | " << pad("Verb", kCell) << " | " << pad("Noun", kCell) << " | Action\n";
  out << std::string(name_width + 3 * (kCell + 3) + 1, '-') << '\n';
  for (const auto& [name, m] : rows) {
    out << pad(name, name_width);
    for (std::size_t t = 0; t < 3; ++t) {
      const std::string cell = fixed(m.top1[t]) + " (" + fixed(m.top5[t]) + ")";
      out << " | " << (t < 2 ? pad(cell, kCell) : cell);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace vidrec
