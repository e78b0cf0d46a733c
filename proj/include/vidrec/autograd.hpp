#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vidrec/tensor.hpp"

namespace vidrec {

class Tape;

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  Tape* tape = nullptr;
  std::function<void(const Tensor&)> backprop;

  // Zero-initialized on first use.
  Tensor& grad_buffer();
};

}  // namespace detail

// Handle to a value in a (possibly recorded) computation. Values that do not
// depend on any watched input are constants and are never recorded, so a
// forward pass over constants keeps no intermediates alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tape* tape() const { return node_ ? node_->tape : nullptr; }
  bool valid() const { return static_cast<bool>(node_); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  friend class Tape;
  friend Var constant(Tensor value);
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

Var constant(Tensor value);

struct Gradients {
  std::vector<Tensor> grads;   // one per requested input, shaped like it
  std::vector<bool> reachable;  // false when the loss does not depend on it
};

// Records the ops applied to watched inputs, in execution order, so reverse
// accumulation can walk them backwards. One tape per computation; single
// owner, not thread-safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var watch(Tensor value);

  // Runs reverse accumulation from a scalar loss. May be called once.
  Gradients backward(const Var& loss, std::span<const Var> inputs);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations: wraps `value` as the result of an op over
  // `inputs`. Records `backprop` only if some input requires a gradient.
  static Var record(Tensor value, std::initializer_list<const Var*> inputs,
                    std::function<void(const Tensor&)> backprop);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  bool consumed_ = false;
};

// Differentiable ops over Var. Shapes follow the Tensor-level ops.
namespace ag {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var affine(const Var& x, double scale, double shift);
// x[..., n] + b[n]
Var add_lastdim(const Var& x, const Var& b);
// x[C, ...] + b[C]
Var add_channel(const Var& x, const Var& b);

Var sum(const Var& x);
Var mean_lastdim(const Var& x);

Var matmul(const Var& a, const Var& b);
Var batched_matmul(const Var& a, const Var& b);
// x[M x K] * w[K x N] + b[N]
Var linear(const Var& x, const Var& w, const Var& b);

Var softmax_lastdim(const Var& x);
Var sigmoid(const Var& x);
Var gelu(const Var& x);
// Gradient is 1 strictly inside (lo, hi) and 0 elsewhere; not differentiable
// at lo or hi, so finite-difference checks there are meaningless.
Var clamp(const Var& x, double lo, double hi);

Var layer_norm(const Var& x, double eps = 1e-5);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var conv3d(const Var& x, const Var& kernel);
// Mean over non-overlapping 2x2 windows of the last two axes; odd trailing
// rows/columns are dropped.
Var avg_pool2x2(const Var& x);

// out[i] = x[index[i]], or 0 where index[i] < 0.
using GatherIndex = std::shared_ptr<const std::vector<std::ptrdiff_t>>;
Var gather(const Var& x, Shape out_shape, GatherIndex index);
Var reshape(const Var& x, Shape shape);
Var concat0(const Var& a, const Var& b);

// -log softmax(logits)[target] for a 1-d logit vector.
Var softmax_cross_entropy(const Var& logits, std::size_t target);

}  // namespace ag

using Program = std::function<Var(std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients with extrapolated central differences
// (initial step `step`):
// max over components of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// f must return a scalar.
GradCheckReport grad_check(const Program& f, const std::vector<Tensor>& inputs, double step = 1e-2);
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double step = 1e-2);

}  // namespace vidrec
