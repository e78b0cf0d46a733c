#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vidrec/autograd.hpp"
#include "vidrec/tensor.hpp"

namespace vidrec {

// Partition of the d_h head channels over the temporal offsets
// -t_w..+t_w. Keys and values at offset d contribute exactly the channels in
// block(d), taken from frame t+d.
class ChannelPlan {
 public:
  // Contiguous equal blocks in offset order; leftover channels go to offset 0.
  // Requires head_dim >= 2 * t_w + 1.
  static ChannelPlan build(std::size_t head_dim, int t_w);

  int t_w() const { return t_w_; }
  std::size_t head_dim() const { return offset_of_.size(); }
  std::size_t offset_count() const { return blocks_.size(); }

  const std::vector<std::size_t>& block(int offset) const;
  // Temporal offset that channel `c` is read from.
  int offset_of(std::size_t c) const { return offset_of_.at(c); }

  // One line per offset: `offset <d>: c0,c1,...`
  std::string serialize() const;
  static ChannelPlan parse(const std::string& text);

  bool operator==(const ChannelPlan&) const = default;

 private:
  ChannelPlan(int t_w, std::vector<std::vector<std::size_t>> blocks);

  int t_w_ = 0;
  std::vector<std::vector<std::size_t>> blocks_;
  std::vector<int> offset_of_;
};

// Query/key/value fields of one clip, laid out [heads x T x S x d_h].
struct TokenField {
  Tensor q, k, v;

  TokenField(Tensor q_, Tensor k_, Tensor v_);

  std::size_t heads() const { return q.dim(0); }
  std::size_t frames() const { return q.dim(1); }
  std::size_t tokens() const { return q.dim(2); }
  std::size_t head_dim() const { return q.dim(3); }
};

// y: [heads x T x S x d_h], the attended values per query.
struct AttentionOutput {
  Tensor y;
};

// Mixed key/value of spatial location s_src as seen from query frame t.
std::pair<std::vector<double>, std::vector<double>> assemble_mixed_kv(const TokenField& field, const ChannelPlan& plan,
                                                                      std::size_t head, std::size_t t,
                                                                      std::size_t s_src);

// Space-time mixing attention: every query attends over the S spatial
// locations of its own frame, with keys/values whose channels are gathered
// from neighbouring frames according to the plan (frame indices clamped to
// [0, T-1]). Cost is linear in T.
AttentionOutput stm_attention(const TokenField& field, const ChannelPlan& plan);
Var stm_attention(const Var& q, const Var& k, const Var& v, const ChannelPlan& plan);

// Softmax weights [heads*T x S x S] used by stm_attention.
Tensor stm_attention_weights(const TokenField& field, const ChannelPlan& plan);

// Direct loop transcription of the mixing attention, kept as an oracle.
AttentionOutput mixing_reference(const TokenField& field, const ChannelPlan& plan);

// Joint attention over all S*T tokens; cost quadratic in T.
AttentionOutput full_st_attention(const TokenField& field);
Var full_st_attention(const Var& q, const Var& k, const Var& v);

// Per-frame attention over the S tokens of each frame.
AttentionOutput spatial_attention(const TokenField& field);
Var spatial_attention(const Var& q, const Var& k, const Var& v);

}  // namespace vidrec
