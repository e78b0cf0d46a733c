#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vidrec {

enum class AttentionKind { kSpaceTimeMixing, kFullSpaceTime };

AttentionKind parse_attention_kind(const std::string& name);  // "stm" or "full"
const char* attention_kind_name(AttentionKind kind);

struct ScalingPoint {
  std::size_t frames = 0;
  std::uint64_t macs = 0;
};

struct ScalingResult {
  AttentionKind kind = AttentionKind::kSpaceTimeMixing;
  std::size_t tokens = 0;
  std::size_t head_dim = 0;
  std::vector<ScalingPoint> points;
  double slope = 0.0;  // least-squares slope of log(MACs) against log(T)
};

// Least-squares slope of log(y) on log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// Runs one seeded single-head attention forward per T with a fresh counter.
// stm uses a temporal window of t_w.
ScalingResult mac_scaling_experiment(AttentionKind kind, std::span<const std::size_t> frame_counts, std::size_t tokens,
                                     std::size_t head_dim, std::uint64_t seed = 0, int t_w = 1);

// `model,T,S,dh,macs` header and rows.
std::string scaling_csv(std::span<const ScalingResult> results);

}  // namespace vidrec
