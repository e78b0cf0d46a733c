#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vidrec/bench.hpp"
#include "vidrec/metrics.hpp"

using namespace vidrec;
using vidrec::testing::random_tensor;

TEST(TopK, OneHotAndUniformTieRule) {
  std::vector<Tensor> scores;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 5; ++i) {
    Tensor t({5});
    t[i] = 1.0;
    scores.push_back(t);
    labels.push_back(i);
  }
  EXPECT_EQ(topk_accuracy(scores, labels, 1), 100.0);
  const std::vector<Tensor> uniform(10, Tensor({10}, 0.1));
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t k = 1; k <= 10; ++k) EXPECT_EQ(topk_accuracy(uniform, all, k), 10.0 * double(k));
  EXPECT_THROW(topk_accuracy(std::vector<Tensor>{}, std::vector<std::size_t>{}, 1), std::invalid_argument);
  EXPECT_THROW(topk_accuracy(scores, labels, 0), std::invalid_argument);
}

TEST(TopK, MatchesSortOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> label(0, 11);
  std::vector<Tensor> scores;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 200; ++i) {
    Tensor t = random_tensor({12}, rng);
    for (double& v : t.data()) v = std::round(v * 4.0) / 4.0;
    scores.push_back(t);
    labels.push_back(label(rng));
  }
  for (std::size_t k = 1; k <= 12; ++k) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      std::vector<std::size_t> order(12);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return scores[i][a] > scores[i][b]; });
      hits += std::find(order.begin(), order.begin() + long(k), labels[i]) != order.begin() + long(k);
    }
    EXPECT_EQ(topk_accuracy(scores, labels, k), 100.0 * double(hits) / 200.0) << k;
  }
}

TEST(TopK, RandomScoresNearChance) {
  std::mt19937_64 rng(2);
  const std::size_t A = 20, n = 4000, k = 5;
  std::vector<Tensor> scores;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < n; ++i) {
    scores.push_back(random_tensor({A}, rng));
    labels.push_back(i % A);
  }
  const double p = double(k) / double(A);
  const double sigma = 100.0 * std::sqrt(p * (1 - p) / double(n));
  EXPECT_NEAR(topk_accuracy(scores, labels, k), 100.0 * p, 3.0 * sigma);
}

TEST(Evaluate, MissingActionCountsAsMissAndTop1BelowTop5) {
  std::mt19937_64 rng(3);
  std::vector<PredictionScores> preds;
  std::vector<TaskLabels> labels;
  for (int i = 0; i < 50; ++i) {
    preds.push_back({random_tensor({3}, rng), random_tensor({8}, rng), random_tensor({6}, rng)});
    labels.push_back({std::size_t(i % 3), std::size_t(i % 8), i % 2 ? std::optional<std::size_t>(i % 6) : std::nullopt});
  }
  const MetricReport r = evaluate(preds, labels);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_LE(r.top1[t], r.top5[t]);
    EXPECT_GE(r.top1[t], 0.0);
    EXPECT_LE(r.top5[t], 100.0);
  }
  EXPECT_LE(r.top5[kAction], 50.0);
  EXPECT_EQ(r.top5[kVerb], 100.0);
  const std::string csv = metrics_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "task,top1,top5");
}

TEST(Bench, SlopesAndEqualityAtOneFrame) {
  const std::vector<std::size_t> frames{2, 4, 8, 16};
  const ScalingResult stm = mac_scaling_experiment(AttentionKind::kSpaceTimeMixing, frames, 16, 16);
  const ScalingResult full = mac_scaling_experiment(AttentionKind::kFullSpaceTime, frames, 16, 16);
  EXPECT_NEAR(stm.slope, 1.0, 0.1);
  EXPECT_NEAR(full.slope, 2.0, 0.1);
  const std::vector<std::size_t> one{1, 2, 3};
  EXPECT_EQ(mac_scaling_experiment(AttentionKind::kSpaceTimeMixing, one, 9, 8).points[0].macs,
            mac_scaling_experiment(AttentionKind::kFullSpaceTime, one, 9, 8).points[0].macs);
  EXPECT_THROW(mac_scaling_experiment(AttentionKind::kFullSpaceTime, std::vector<std::size_t>{2, 4}, 9, 8),
               std::invalid_argument);
  const std::vector<ScalingResult> both{stm, full};
  const std::string csv = scaling_csv(both);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,T,S,dh,macs");
}

TEST(Bench, LoglogSlopeOfPowerLaw) {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 24, 192, 1536};
  EXPECT_NEAR(loglog_slope(x, y), 3.0, 1e-12);
}
