#include "vidrec/bench.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "vidrec/attention.hpp"

namespace vidrec {

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "stm") return AttentionKind::kSpaceTimeMixing;
  if (name == "full") return AttentionKind::kFullSpaceTime;
  throw std::invalid_argument("unknown attention model '" + name + "' (expected stm or full)");
}

const char* attention_kind_name(AttentionKind kind) {
  return kind == AttentionKind::kSpaceTimeMixing ? "stm" : "full";
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs matching points, at least 2");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0) throw std::invalid_argument("log-log fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw std::invalid_argument("slope fit needs distinct x values");
  return sxy / sxx;
}

ScalingResult mac_scaling_experiment(AttentionKind kind, std::span<const std::size_t> frame_counts, std::size_t tokens,
                                     std::size_t head_dim, std::uint64_t seed, int t_w) {
  if (frame_counts.size() < 3) throw std::invalid_argument("scaling experiment needs at least 3 frame counts");
  ScalingResult result{kind, tokens, head_dim, {}, 0.0};
  const ChannelPlan plan = ChannelPlan::build(head_dim, t_w);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> xs, ys;
  for (std::size_t T : frame_counts) {
    Shape shape{1, T, tokens, head_dim};
    Tensor q(shape), k(shape), v(shape);
    for (Tensor* t : {&q, &k, &v}) {
      for (double& x : t->data()) x = dist(rng);
    }
    const TokenField field(std::move(q), std::move(k), std::move(v));
    MacCounter counter;
    {
      MacScope scope(counter);
      if (kind == AttentionKind::kSpaceTimeMixing) {
        stm_attention(field, plan);
      } else {
        full_st_attention(field);
      }
    }
    result.points.push_back({T, counter.macs()});
    xs.push_back(static_cast<double>(T));
    ys.push_back(static_cast<double>(counter.macs()));
  }
  result.slope = loglog_slope(xs, ys);
  return result;
}

std::string scaling_csv(std::span<const ScalingResult> results) {
  std::string out = "model,T,S,dh,macs\n";
  for (const ScalingResult& r : results) {
    for (const ScalingPoint& p : r.points) {
      out += std::string(attention_kind_name(r.kind)) + "," + std::to_string(p.frames) + "," +
             std::to_string(r.tokens) + "," + std::to_string(r.head_dim) + "," + std::to_string(p.macs) + "\n";
    }
  }
  return out;
}

}  // namespace vidrec
