#include "vidrec/checks.hpp"

#include <algorithm>
#include <random>

#include "vidrec/attention.hpp"
#include "vidrec/gsf.hpp"
#include "vidrec/heads.hpp"
#include "vidrec/xvit.hpp"

namespace vidrec {

namespace {

Tensor normal_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Scalar probe sum(y * w) with a fixed random w.
Var probe(const Var& y, const Tensor& w) { return ag::sum(ag::mul(y, constant(w))); }

CheckResult model_check(const std::string& name, const VideoModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ParamStore store = model.init_params(seed);
  const Tensor clip = normal_tensor({model.frames(), 3, model.input_height(), model.input_width()}, rng, 1.0);
  const TaskLabels labels{1, 2, 5};
  std::vector<Tensor> inputs;
  for (const std::string& n : store.names()) inputs.push_back(store.get(n));
  const std::vector<std::string> names = store.names();
  const Program f = [&](std::span<const Var> in) {
    return multitask_loss(model.forward(clip, BoundParams::bind(names, in)), labels);
  };
  return {name, grad_check(f, inputs).max_rel_error, 1e-4};
}

}  // namespace

std::vector<CheckResult> equivalence_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double grid = 0.0, spatial = 0.0, single = 0.0;
  std::size_t cases = 0;
  for (std::size_t S : {1, 4, 9}) {
    for (std::size_t T : {1, 2, 4, 8}) {
      for (std::size_t d : {4, 8, 64}) {
        const Shape shape{2, T, S, d};
        const TokenField field(normal_tensor(shape, rng), normal_tensor(shape, rng), normal_tensor(shape, rng));
        for (int t_w : {0, 1, 2}) {
          if (d < static_cast<std::size_t>(2 * t_w + 1)) continue;
          ++cases;
          const ChannelPlan plan = ChannelPlan::build(d, t_w);
          grid = std::max(grid, max_abs_diff(stm_attention(field, plan).y, mixing_reference(field, plan).y));
        }
        spatial = std::max(spatial, max_abs_diff(stm_attention(field, ChannelPlan::build(d, 0)).y,
                                                 spatial_attention(field).y));
        if (T == 1) {
          single = std::max(single, max_abs_diff(stm_attention(field, ChannelPlan::build(d, 1)).y,
                                                 full_st_attention(field).y));
        }
      }
    }
  }
  return {{"stm_attention == mixing_reference (" + std::to_string(cases) + "-case grid)", grid, 1e-12},
          {"t_w=0 == spatial_attention", spatial, 1e-12},
          {"T=1 == full_st_attention", single, 1e-12}};
}

std::vector<CheckResult> gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  {
    const Shape shape{2, 3, 4, 6};
    const std::vector<Tensor> qkv{normal_tensor(shape, rng), normal_tensor(shape, rng), normal_tensor(shape, rng)};
    const Tensor w = normal_tensor(shape, rng);
    for (int t_w : {0, 1}) {
      const ChannelPlan plan = ChannelPlan::build(6, t_w);
      const Program f = [&](std::span<const Var> in) { return probe(stm_attention(in[0], in[1], in[2], plan), w); };
      out.push_back({"stm_attention t_w=" + std::to_string(t_w), grad_check(f, qkv).max_rel_error, 1e-4});
    }
    const Program full = [&](std::span<const Var> in) { return probe(full_st_attention(in[0], in[1], in[2]), w); };
    out.push_back({"full_st_attention", grad_check(full, qkv).max_rel_error, 1e-4});
  }

  for (Fusion fusion : {Fusion::kAdditive, Fusion::kWeighted}) {
    const GsfConfig cfg{4, fusion};
    ParamStore store;
    add_gsf_params(store, "g", cfg, rng);
    // Nonzero gate bias keeps the gates away from 0.5 symmetry.
    store.get("g.gate.b") = normal_tensor({2}, rng, 0.5);
    const Shape xs{4, 3, 5, 5};
    const Tensor w = normal_tensor(xs, rng);
    std::vector<Tensor> inputs{normal_tensor(xs, rng)};
    for (const std::string& n : store.names()) inputs.push_back(store.get(n));
    const std::vector<std::string> names = store.names();
    const Program f = [&](std::span<const Var> in) {
      return probe(gsf_forward(in[0], cfg, BoundParams::bind(names, in.subspan(1)), "g"), w);
    };
    out.push_back({std::string("gsf_forward ") + fusion_name(fusion), grad_check(f, inputs).max_rel_error, 1e-4});
  }

  {
    const std::vector<Tensor> logits{normal_tensor({3}, rng), normal_tensor({4}, rng), normal_tensor({6}, rng)};
    for (bool with_action : {true, false}) {
      const TaskLabels labels{2, 1, with_action ? std::optional<std::size_t>(4) : std::nullopt};
      const Program f = [&](std::span<const Var> in) { return multitask_loss(ScoreVars{in[0], in[1], in[2]}, labels); };
      out.push_back({std::string("multitask_loss") + (with_action ? "" : " (no action label)"),
                     grad_check(f, logits).max_rel_error, 1e-4});
    }
  }

  for (Fusion fusion : {Fusion::kAdditive, Fusion::kWeighted}) {
    ToyBackboneConfig cfg;
    cfg.widths = {4, 6};
    cfg.fusion = fusion;
    cfg.frames = 3;
    cfg.input_h = cfg.input_w = 8;
    out.push_back(model_check(std::string("toy gsf backbone ") + fusion_name(fusion), ToyGsfModel(cfg), seed + 1));
  }
  {
    XViTConfig cfg;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.embed_dim = 8;
    cfg.patch = 4;
    cfg.frames = 3;
    cfg.input_h = cfg.input_w = 8;
    out.push_back(model_check("toy xvit", XViTModel(cfg), seed + 2));
  }
  return out;
}

}  // namespace vidrec
