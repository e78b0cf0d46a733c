#include "vidrec/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vidrec {

Tensor& detail::Node::grad_buffer() {
  if (!has_grad) {
    grad = Tensor(value.shape());
    has_grad = true;
  }
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Tape::watch(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->tape = this;
  nodes_.push_back(node);
  return Var(std::move(node));
}

Var Tape::record(Tensor value, std::initializer_list<const Var*> inputs,
                 std::function<void(const Tensor&)> backprop) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  Tape* tape = nullptr;
  for (const Var* in : inputs) {
    if (!in->valid()) throw std::invalid_argument("op applied to an empty Var");
    if (!in->requires_grad()) continue;
    if (tape && tape != in->tape()) throw std::invalid_argument("op mixes Vars from different tapes");
    tape = in->tape();
  }
  if (tape) {
    if (tape->consumed_) throw std::logic_error("recording on a tape after backward()");
    node->requires_grad = true;
    node->tape = tape;
    node->backprop = std::move(backprop);
    tape->nodes_.push_back(node);
  }
  return Var(std::move(node));
}

Gradients Tape::backward(const Var& loss, std::span<const Var> inputs) {
  if (!loss.valid() || !loss.value().is_scalar()) {
    throw std::invalid_argument("backward needs a scalar loss");
  }
  if (consumed_) throw std::logic_error("backward() called twice on the same tape");
  consumed_ = true;
  if (loss.requires_grad()) {
    if (loss.tape() != this) throw std::invalid_argument("loss was recorded on a different tape");
    loss.node()->grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      detail::Node& node = **it;
      if (node.has_grad && node.backprop) node.backprop(node.grad);
    }
  }
  Gradients out;
  for (const Var& in : inputs) {
    const bool reached = in.valid() && in.node()->has_grad && in.tape() == this;
    out.reachable.push_back(reached);
    out.grads.push_back(reached ? in.node()->grad : Tensor(in.shape()));
  }
  return out;
}

namespace ag {

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + " shape mismatch: " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

Shape drop_last(const Shape& s) {
  if (s.size() <= 1) return Shape{1};
  return Shape(s.begin(), s.end() - 1);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  NodePtr na = a.node(), nb = b.node();
  return Tape::record(std::move(out), {&a, &b}, [na, nb](const Tensor& g) {
    for (const NodePtr& n : {na, nb}) {
      if (!n->requires_grad) continue;
      Tensor& buf = n->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  NodePtr na = a.node(), nb = b.node();
  return Tape::record(std::move(out), {&a, &b}, [na, nb](const Tensor& g) {
    if (na->requires_grad) {
      Tensor& buf = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
    if (nb->requires_grad) {
      Tensor& buf = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  NodePtr na = a.node(), nb = b.node();
  return Tape::record(std::move(out), {&a, &b}, [na, nb](const Tensor& g) {
    if (na->requires_grad) {
      Tensor& buf = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * nb->value[i];
    }
    if (nb->requires_grad) {
      Tensor& buf = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * na->value[i];
    }
  });
}

Var affine(const Var& x, double scale, double shift) {
  Tensor out = x.value();
  for (double& v : out.data()) v = scale * v + shift;
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, scale](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += scale * g[i];
  });
}

Var add_lastdim(const Var& x, const Var& b) {
  const std::size_t n = x.shape().back();
  if (b.value().rank() != 1 || b.value().size() != n) {
    throw std::invalid_argument("add_lastdim: bias " + shape_str(b.shape()) + " does not match " +
                                shape_str(x.shape()));
  }
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i % n];
  NodePtr nx = x.node(), nb = b.node();
  return Tape::record(std::move(out), {&x, &b}, [nx, nb, n](const Tensor& g) {
    if (nx->requires_grad) {
      Tensor& buf = nx->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
    if (nb->requires_grad) {
      Tensor& buf = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i % n] += g[i];
    }
  });
}

Var add_channel(const Var& x, const Var& b) {
  const std::size_t c = x.shape().front();
  if (b.value().rank() != 1 || b.value().size() != c) {
    throw std::invalid_argument("add_channel: bias " + shape_str(b.shape()) + " does not match " +
                                shape_str(x.shape()));
  }
  const std::size_t inner = x.value().size() / c;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i / inner];
  NodePtr nx = x.node(), nb = b.node();
  return Tape::record(std::move(out), {&x, &b}, [nx, nb, inner](const Tensor& g) {
    if (nx->requires_grad) {
      Tensor& buf = nx->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
    if (nb->requires_grad) {
      Tensor& buf = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i / inner] += g[i];
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  NodePtr nx = x.node();
  return Tape::record(Tensor::scalar(s), {&x}, [nx](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    for (double& v : buf.data()) v += g[0];
  });
}

Var mean_lastdim(const Var& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.value().size() / n;
  Tensor out(drop_last(x.shape()));
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x.value()[r * n + i];
    out[r] = s / static_cast<double>(n);
  }
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, n, rows](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < n; ++i) buf[r * n + i] += g[r] * inv;
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  Tensor out = vidrec::matmul(a.value(), b.value());
  NodePtr na = a.node(), nb = b.node();
  return Tape::record(std::move(out), {&a, &b}, [na, nb](const Tensor& g) {
    const std::size_t m = na->value.dim(0), k = na->value.dim(1), n = nb->value.dim(1);
    if (na->requires_grad) {
      kernels::gemm_accumulate(g.data().data(), nb->value.data().data(), na->grad_buffer().data().data(), m, n, k,
                               false, true);
    }
    if (nb->requires_grad) {
      kernels::gemm_accumulate(na->value.data().data(), g.data().data(), nb->grad_buffer().data().data(), k, m, n,
                               true, false);
    }
  });
}

Var batched_matmul(const Var& a, const Var& b) {
  Tensor out = vidrec::batched_matmul(a.value(), b.value());
  NodePtr na = a.node(), nb = b.node();
  return Tape::record(std::move(out), {&a, &b}, [na, nb](const Tensor& g) {
    const std::size_t batch = na->value.dim(0), m = na->value.dim(1), k = na->value.dim(2),
                      n = nb->value.dim(2);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* gi = g.data().data() + i * m * n;
      if (na->requires_grad) {
        kernels::gemm_accumulate(gi, nb->value.data().data() + i * k * n,
                                 na->grad_buffer().data().data() + i * m * k, m, n, k, false, true);
      }
      if (nb->requires_grad) {
        kernels::gemm_accumulate(na->value.data().data() + i * m * k, gi,
                                 nb->grad_buffer().data().data() + i * k * n, k, m, n, true, false);
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_lastdim(matmul(x, w), b); }

Var softmax_lastdim(const Var& x) {
  Tensor out = vidrec::softmax_lastdim(x.value());
  auto y = std::make_shared<Tensor>(out);
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, y](const Tensor& g) {
    const std::size_t n = y->shape().back();
    const std::size_t rows = y->size() / n;
    Tensor& buf = nx->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += g[r * n + i] * (*y)[r * n + i];
      for (std::size_t i = 0; i < n; ++i) buf[r * n + i] += (*y)[r * n + i] * (g[r * n + i] - dot);
    }
  });
}

namespace {

double sigmoid_scalar(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x.value()[i]);
  auto y = std::make_shared<Tensor>(out);
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, y](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * (*y)[i] * (1.0 - (*y)[i]);
  });
}

Var gelu(const Var& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.value()[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  }
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = nx->value[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      buf[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out = x.value();
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, lo, hi](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = nx->value[i];
      if (v > lo && v < hi) buf[i] += g[i];
    }
  });
}

namespace {

struct NormStats {
  Tensor xhat;
  std::vector<double> inv_std;
};

NormStats normalize_rows(const Tensor& x, double eps) {
  NormStats s{vidrec::layer_norm(x, eps), {}};
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  s.inv_std.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[r * n + i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x[r * n + i] - mean) * (x[r * n + i] - mean);
    var /= static_cast<double>(n);
    s.inv_std[r] = 1.0 / std::sqrt(var + eps);
  }
  return s;
}

// dx from d(xhat) for one row.
void layer_norm_row_backward(const double* dxhat, const double* xhat, double inv_std, std::size_t n, double* dx) {
  double mean_d = 0.0, mean_dx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_d += dxhat[i];
    mean_dx += dxhat[i] * xhat[i];
  }
  mean_d /= static_cast<double>(n);
  mean_dx /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) dx[i] += inv_std * (dxhat[i] - mean_d - xhat[i] * mean_dx);
}

}  // namespace

Var layer_norm(const Var& x, double eps) {
  auto stats = std::make_shared<NormStats>(normalize_rows(x.value(), eps));
  Tensor out = stats->xhat;
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, stats](const Tensor& g) {
    const std::size_t n = g.shape().back();
    const std::size_t rows = g.size() / n;
    Tensor& buf = nx->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      layer_norm_row_backward(g.data().data() + r * n, stats->xhat.data().data() + r * n, stats->inv_std[r], n,
                              buf.data().data() + r * n);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t n = x.shape().back();
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw std::invalid_argument("layer_norm affine parameters must have length " + std::to_string(n));
  }
  auto stats = std::make_shared<NormStats>(normalize_rows(x.value(), eps));
  Tensor out = stats->xhat;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * gamma.value()[i % n] + beta.value()[i % n];
  NodePtr nx = x.node(), ng = gamma.node(), nb = beta.node();
  return Tape::record(std::move(out), {&x, &gamma, &beta}, [nx, ng, nb, stats](const Tensor& g) {
    const std::size_t n = g.shape().back();
    const std::size_t rows = g.size() / n;
    if (ng->requires_grad) {
      Tensor& buf = ng->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i % n] += g[i] * stats->xhat[i];
    }
    if (nb->requires_grad) {
      Tensor& buf = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) buf[i % n] += g[i];
    }
    if (nx->requires_grad) {
      Tensor& buf = nx->grad_buffer();
      std::vector<double> dxhat(n);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < n; ++i) dxhat[i] = g[r * n + i] * ng->value[i];
        layer_norm_row_backward(dxhat.data(), stats->xhat.data().data() + r * n, stats->inv_std[r], n,
                                buf.data().data() + r * n);
      }
    }
  });
}

Var conv3d(const Var& x, const Var& kernel) {
  Tensor out = vidrec::conv3d(x.value(), kernel.value());
  NodePtr nx = x.node(), nk = kernel.node();
  return Tape::record(std::move(out), {&x, &kernel}, [nx, nk](const Tensor& g) {
    if (nx->requires_grad) kernels::conv3d_backward_input(g, nk->value, nx->grad_buffer());
    if (nk->requires_grad) kernels::conv3d_backward_kernel(g, nx->value, nk->grad_buffer());
  });
}

Var avg_pool2x2(const Var& x) {
  const Shape& in = x.shape();
  if (in.size() < 2 || in[in.size() - 1] < 2 || in[in.size() - 2] < 2) {
    throw std::invalid_argument("avg_pool2x2 needs spatial extents >= 2, got " + shape_str(in));
  }
  const std::size_t h = in[in.size() - 2], w = in[in.size() - 1];
  const std::size_t ho = h / 2, wo = w / 2;
  const std::size_t planes = x.value().size() / (h * w);
  Shape out_shape = in;
  out_shape[in.size() - 2] = ho;
  out_shape[in.size() - 1] = wo;
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        const std::size_t base = p * h * w + 2 * i * w + 2 * j;
        out[(p * ho + i) * wo + j] = 0.25 * (xv[base] + xv[base + 1] + xv[base + w] + xv[base + w + 1]);
      }
    }
  }
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, planes, h, w, ho, wo](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < ho; ++i) {
        for (std::size_t j = 0; j < wo; ++j) {
          const double d = 0.25 * g[(p * ho + i) * wo + j];
          const std::size_t base = p * h * w + 2 * i * w + 2 * j;
          buf[base] += d;
          buf[base + 1] += d;
          buf[base + w] += d;
          buf[base + w + 1] += d;
        }
      }
    }
  });
}

Var gather(const Var& x, Shape out_shape, GatherIndex index) {
  if (!index || index->size() != shape_size(out_shape)) {
    throw std::invalid_argument("gather index length does not match output shape " + shape_str(out_shape));
  }
  const std::size_t n_in = x.value().size();
  Tensor out(std::move(out_shape));
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::ptrdiff_t src = (*index)[i];
    if (src >= 0) {
      if (static_cast<std::size_t>(src) >= n_in) throw std::out_of_range("gather index out of range");
      out[i] = xv[static_cast<std::size_t>(src)];
    }
  }
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx, index](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::ptrdiff_t src = (*index)[i];
      if (src >= 0) buf[static_cast<std::size_t>(src)] += g[i];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  NodePtr nx = x.node();
  return Tape::record(std::move(out), {&x}, [nx](const Tensor& g) {
    Tensor& buf = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
  });
}

Var concat0(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1)) {
    throw std::invalid_argument("concat0 shape mismatch: " + shape_str(sa) + " vs " + shape_str(sb));
  }
  Shape out_shape = sa;
  out_shape[0] = sa[0] + sb[0];
  std::vector<double> data(a.value().values());
  data.insert(data.end(), b.value().values().begin(), b.value().values().end());
  NodePtr na = a.node(), nb = b.node();
  const std::size_t split = a.value().size();
  return Tape::record(Tensor(std::move(out_shape), std::move(data)), {&a, &b}, [na, nb, split](const Tensor& g) {
    if (na->requires_grad) {
      Tensor& buf = na->grad_buffer();
      for (std::size_t i = 0; i < split; ++i) buf[i] += g[i];
    }
    if (nb->requires_grad) {
      Tensor& buf = nb->grad_buffer();
      for (std::size_t i = split; i < g.size(); ++i) buf[i - split] += g[i];
    }
  });
}

Var softmax_cross_entropy(const Var& logits, std::size_t target) {
  const Tensor& z = logits.value();
  if (z.rank() != 1) throw std::invalid_argument("softmax_cross_entropy expects 1-d logits, got " + shape_str(z.shape()));
  if (target >= z.size()) {
    throw std::out_of_range("target class " + std::to_string(target) + " out of range for " +
                            std::to_string(z.size()) + " classes");
  }
  auto p = std::make_shared<Tensor>(vidrec::softmax_lastdim(z));
  const double mx = *std::max_element(z.data().begin(), z.data().end());
  double s = 0.0;
  for (double v : z.data()) s += std::exp(v - mx);
  const double loss = mx + std::log(s) - z[target];
  NodePtr nz = logits.node();
  return Tape::record(Tensor::scalar(loss), {&logits}, [nz, p, target](const Tensor& g) {
    Tensor& buf = nz->grad_buffer();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[0] * ((*p)[i] - (i == target ? 1.0 : 0.0));
  });
}

}  // namespace ag

namespace {

// Polynomial extrapolation of central differences to step 0 over a shrinking
// step sequence; keeps the estimate with the smallest tableau disagreement.
template <typename Eval>
double ridders_derivative(Eval&& at, double step) {
  constexpr int kTable = 10;
  constexpr double kShrink = 1.4, kShrink2 = kShrink * kShrink, kSafe = 2.0;
  double table[kTable][kTable];
  double h = step;
  table[0][0] = (at(h) - at(-h)) / (2.0 * h);
  double best = table[0][0], err = std::numeric_limits<double>::max();
  for (int i = 1; i < kTable; ++i) {
    h /= kShrink;
    table[0][i] = (at(h) - at(-h)) / (2.0 * h);
    double fac = kShrink2;
    for (int j = 1; j <= i; ++j) {
      table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
      fac *= kShrink2;
      const double e = std::max(std::abs(table[j][i] - table[j - 1][i]), std::abs(table[j][i] - table[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = table[j][i];
      }
    }
    if (std::abs(table[i][i] - table[i - 1][i - 1]) >= kSafe * err) break;
  }
  return best;
}

}  // namespace

GradCheckReport grad_check(const Program& f, const std::vector<Tensor>& inputs, double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check step must be positive");
  Tape tape;
  std::vector<Var> watched;
  for (const Tensor& t : inputs) watched.push_back(tape.watch(t));
  const Var loss = f(watched);
  if (!loss.valid() || !loss.value().is_scalar()) {
    throw std::invalid_argument("grad_check needs a scalar-valued program");
  }
  const Gradients analytic = tape.backward(loss, watched);

  auto evaluate = [&](const std::vector<Tensor>& xs) {
    std::vector<Var> consts;
    for (const Tensor& t : xs) consts.push_back(constant(t));
    return f(consts).value().item();
  };

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double saved = probe[k][i];
      const double numeric = ridders_derivative(
          [&](double offset) {
            probe[k][i] = saved + offset;
            return evaluate(probe);
          },
          step);
      probe[k][i] = saved;
      const double a = analytic.grads[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error) report = {rel, k, i};
    }
  }
  return report;
}

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double step) {
  return grad_check([&](std::span<const Var> xs) { return f(xs[0]); }, std::vector<Tensor>{x}, step).max_rel_error;
}

}  // namespace vidrec
