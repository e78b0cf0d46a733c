#include "vidrec/attention.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vidrec {

// ---------------------------------------------------------------------------
// ChannelPlan

ChannelPlan::ChannelPlan(int t_w, std::vector<std::vector<std::size_t>> blocks)
    : t_w_(t_w), blocks_(std::move(blocks)) {
  if (t_w_ < 0) throw std::invalid_argument("temporal window must be >= 0");
  if (blocks_.size() != static_cast<std::size_t>(2 * t_w_ + 1)) {
    throw std::invalid_argument("channel plan needs one block per offset");
  }
  std::size_t total = 0;
  for (const auto& b : blocks_) total += b.size();
  offset_of_.assign(total, 0);
  std::vector<bool> seen(total, false);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    if (!std::is_sorted(b.begin(), b.end())) throw std::invalid_argument("channel plan blocks must be sorted");
    for (std::size_t c : b) {
      if (c >= total || seen[c]) throw std::invalid_argument("channel plan blocks must partition [0, d_h)");
      seen[c] = true;
      offset_of_[c] = static_cast<int>(i) - t_w_;
    }
  }
}

ChannelPlan ChannelPlan::build(std::size_t head_dim, int t_w) {
  if (t_w < 0) throw std::invalid_argument("temporal window must be >= 0");
  const std::size_t n = static_cast<std::size_t>(2 * t_w + 1);
  if (head_dim < n) {
    throw std::invalid_argument("channel plan: head dim " + std::to_string(head_dim) + " is smaller than the " +
                                std::to_string(n) + " offsets of t_w = " + std::to_string(t_w));
  }
  std::vector<std::size_t> lengths(n, head_dim / n);
  lengths[static_cast<std::size_t>(t_w)] += head_dim % n;
  std::vector<std::vector<std::size_t>> blocks(n);
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < lengths[i]; ++j) blocks[i].push_back(c++);
  }
  return ChannelPlan(t_w, std::move(blocks));
}

const std::vector<std::size_t>& ChannelPlan::block(int offset) const {
  if (offset < -t_w_ || offset > t_w_) throw std::out_of_range("offset outside temporal window");
  return blocks_[static_cast<std::size_t>(offset + t_w_)];
}

std::string ChannelPlan::serialize() const {
  std::ostringstream out;
  for (int d = -t_w_; d <= t_w_; ++d) {
    out << "offset " << d << ":";
    const auto& b = block(d);
    for (std::size_t i = 0; i < b.size(); ++i) out << (i ? "," : " ") << b[i];
    out << '\n';
  }
  return out.str();
}

ChannelPlan ChannelPlan::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<int, std::vector<std::size_t>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("offset ", 0) != 0) throw std::runtime_error("channel plan: bad line '" + line + "'");
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw std::runtime_error("channel plan: missing ':' in '" + line + "'");
    const int offset = std::stoi(line.substr(7, colon - 7));
    std::vector<std::size_t> channels;
    std::istringstream list(line.substr(colon + 1));
    std::string tok;
    while (std::getline(list, tok, ',')) {
      const auto first = tok.find_first_not_of(' ');
      if (first == std::string::npos) continue;
      channels.push_back(static_cast<std::size_t>(std::stoul(tok.substr(first))));
    }
    rows.emplace_back(offset, std::move(channels));
  }
  if (rows.empty() || rows.size() % 2 == 0) throw std::runtime_error("channel plan: need 2*t_w+1 offset lines");
  const int t_w = static_cast<int>(rows.size() / 2);
  std::vector<std::vector<std::size_t>> blocks(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<int>(i) - t_w) throw std::runtime_error("channel plan: offsets out of order");
    blocks[i] = std::move(rows[i].second);
  }
  return ChannelPlan(t_w, std::move(blocks));
}

// ---------------------------------------------------------------------------
// TokenField

TokenField::TokenField(Tensor q_, Tensor k_, Tensor v_) : q(std::move(q_)), k(std::move(k_)), v(std::move(v_)) {
  if (q.rank() != 4) throw std::invalid_argument("token field must be [heads x T x S x d_h], got " + shape_str(q.shape()));
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw std::invalid_argument("q, k, v shapes differ: " + shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                                ", " + shape_str(v.shape()));
  }
}

namespace {

std::size_t clamp_frame(long t, std::size_t frames) {
  return static_cast<std::size_t>(std::clamp(t, 0L, static_cast<long>(frames) - 1));
}

void check_qkv(const Var& q, const Var& k, const Var& v) {
  if (q.shape().size() != 4) throw std::invalid_argument("attention expects [heads x T x S x d_h], got " + shape_str(q.shape()));
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw std::invalid_argument("attention q/k/v shape mismatch: " + shape_str(q.shape()) + ", " +
                                shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
}

void check_plan(const ChannelPlan& plan, std::size_t head_dim) {
  if (plan.head_dim() != head_dim) {
    throw std::invalid_argument("channel plan covers " + std::to_string(plan.head_dim()) + " channels but heads have " +
                                std::to_string(head_dim));
  }
}

// Index maps that read the mixed keys (transposed to [H*T x d x S]) and the
// mixed values ([H*T x S x d]) straight out of the [H x T x S x d] fields.
struct MixIndex {
  ag::GatherIndex keys_t;
  ag::GatherIndex values;
};

MixIndex mixing_index(const Shape& shape, const ChannelPlan& plan) {
  const std::size_t heads = shape[0], frames = shape[1], tokens = shape[2], dim = shape[3];
  auto keys = std::make_shared<std::vector<std::ptrdiff_t>>(heads * frames * dim * tokens);
  auto values = std::make_shared<std::vector<std::ptrdiff_t>>(heads * frames * tokens * dim);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t c = 0; c < dim; ++c) {
        const std::size_t src_t = clamp_frame(static_cast<long>(t) + plan.offset_of(c), frames);
        for (std::size_t s = 0; s < tokens; ++s) {
          const auto src = static_cast<std::ptrdiff_t>(((h * frames + src_t) * tokens + s) * dim + c);
          (*keys)[((h * frames + t) * dim + c) * tokens + s] = src;
          (*values)[((h * frames + t) * tokens + s) * dim + c] = src;
        }
      }
    }
  }
  return {keys, values};
}

// Attention over `groups` independent sets of `tokens` queries/keys; q is
// [groups x tokens x d], keys_t [groups x d x tokens], values [groups x tokens x d].
Var attend(const Var& q, const Var& keys_t, const Var& values, std::size_t dim) {
  const Var scores = ag::affine(ag::batched_matmul(q, keys_t), 1.0 / std::sqrt(static_cast<double>(dim)), 0.0);
  return ag::batched_matmul(ag::softmax_lastdim(scores), values);
}

Var mixing_attention(const Var& q, const Var& k, const Var& v, const ChannelPlan& plan, Var* weights = nullptr) {
  check_qkv(q, k, v);
  const Shape& shape = q.shape();
  check_plan(plan, shape[3]);
  const std::size_t groups = shape[0] * shape[1], tokens = shape[2], dim = shape[3];
  const MixIndex idx = mixing_index(shape, plan);
  const Var keys_t = ag::gather(k, Shape{groups, dim, tokens}, idx.keys_t);
  const Var values = ag::gather(v, Shape{groups, tokens, dim}, idx.values);
  const Var qs = ag::reshape(q, Shape{groups, tokens, dim});
  if (weights) {
    const Var scores = ag::affine(ag::batched_matmul(qs, keys_t), 1.0 / std::sqrt(static_cast<double>(dim)), 0.0);
    *weights = ag::softmax_lastdim(scores);
  }
  return ag::reshape(attend(qs, keys_t, values, dim), shape);
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> assemble_mixed_kv(const TokenField& field, const ChannelPlan& plan,
                                                                      std::size_t head, std::size_t t,
                                                                      std::size_t s_src) {
  check_plan(plan, field.head_dim());
  if (head >= field.heads() || t >= field.frames() || s_src >= field.tokens()) {
    throw std::out_of_range("assemble_mixed_kv index out of range");
  }
  const std::size_t dim = field.head_dim();
  std::vector<double> k(dim), v(dim);
  for (int d = -plan.t_w(); d <= plan.t_w(); ++d) {
    const std::size_t src_t = clamp_frame(static_cast<long>(t) + d, field.frames());
    for (std::size_t c : plan.block(d)) {
      k[c] = field.k.at({head, src_t, s_src, c});
      v[c] = field.v.at({head, src_t, s_src, c});
    }
  }
  return {std::move(k), std::move(v)};
}

Var stm_attention(const Var& q, const Var& k, const Var& v, const ChannelPlan& plan) {
  return mixing_attention(q, k, v, plan);
}

AttentionOutput stm_attention(const TokenField& field, const ChannelPlan& plan) {
  return {stm_attention(constant(field.q), constant(field.k), constant(field.v), plan).value()};
}

Tensor stm_attention_weights(const TokenField& field, const ChannelPlan& plan) {
  Var weights;
  mixing_attention(constant(field.q), constant(field.k), constant(field.v), plan, &weights);
  return weights.value();
}

Var spatial_attention(const Var& q, const Var& k, const Var& v) {
  check_qkv(q, k, v);
  return mixing_attention(q, k, v, ChannelPlan::build(q.shape()[3], 0));
}

AttentionOutput spatial_attention(const TokenField& field) {
  return {spatial_attention(constant(field.q), constant(field.k), constant(field.v)).value()};
}

Var full_st_attention(const Var& q, const Var& k, const Var& v) {
  check_qkv(q, k, v);
  const Shape& shape = q.shape();
  const std::size_t heads = shape[0], n = shape[1] * shape[2], dim = shape[3];
  auto keys_idx = std::make_shared<std::vector<std::ptrdiff_t>>(heads * dim * n);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t c = 0; c < dim; ++c) {
      for (std::size_t j = 0; j < n; ++j) {
        (*keys_idx)[(h * dim + c) * n + j] = static_cast<std::ptrdiff_t>((h * n + j) * dim + c);
      }
    }
  }
  const Var keys_t = ag::gather(k, Shape{heads, dim, n}, keys_idx);
  const Var out = attend(ag::reshape(q, Shape{heads, n, dim}), keys_t, ag::reshape(v, Shape{heads, n, dim}), dim);
  return ag::reshape(out, shape);
}

AttentionOutput full_st_attention(const TokenField& field) {
  return {full_st_attention(constant(field.q), constant(field.k), constant(field.v)).value()};
}

AttentionOutput mixing_reference(const TokenField& field, const ChannelPlan& plan) {
  check_plan(plan, field.head_dim());
  const std::size_t heads = field.heads(), frames = field.frames(), tokens = field.tokens(), dim = field.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  Tensor y(field.q.shape());
  std::vector<double> scores(tokens);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t s = 0; s < tokens; ++s) {
        // Scores against the mixed keys of every spatial location.
        for (std::size_t s2 = 0; s2 < tokens; ++s2) {
          double dot = 0.0;
          for (int d = -plan.t_w(); d <= plan.t_w(); ++d) {
            const std::size_t src_t = clamp_frame(static_cast<long>(t) + d, frames);
            for (std::size_t c : plan.block(d)) dot += field.q.at({h, t, s, c}) * field.k.at({h, src_t, s2, c});
          }
          scores[s2] = dot * scale;
        }
        double mx = scores[0];
        for (std::size_t s2 = 1; s2 < tokens; ++s2) mx = std::max(mx, scores[s2]);
        double z = 0.0;
        for (std::size_t s2 = 0; s2 < tokens; ++s2) {
          scores[s2] = std::exp(scores[s2] - mx);
          z += scores[s2];
        }
        for (std::size_t s2 = 0; s2 < tokens; ++s2) {
          const double w = scores[s2] / z;
          for (int d = -plan.t_w(); d <= plan.t_w(); ++d) {
            const std::size_t src_t = clamp_frame(static_cast<long>(t) + d, frames);
            for (std::size_t c : plan.block(d)) y.at({h, t, s, c}) += w * field.v.at({h, src_t, s2, c});
          }
        }
      }
    }
  }
  return {std::move(y)};
}

}  // namespace vidrec
