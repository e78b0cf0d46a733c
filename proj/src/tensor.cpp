#include "vidrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace vidrec {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor extent must be >= 1, got " + shape_str(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
  }
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw std::out_of_range("index rank mismatch for tensor " + shape_str(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw std::out_of_range("index out of range for tensor " + shape_str(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }

double Tensor::item() const {
  if (!is_scalar()) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.values() == b.values();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_abs_diff shape mismatch: " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// MAC accounting

namespace {
thread_local MacScope* innermost_scope = nullptr;
}

MacScope::MacScope(MacCounter& counter) : counter_(&counter), previous_(innermost_scope) { innermost_scope = this; }
MacScope::~MacScope() { innermost_scope = previous_; }

void count_macs(std::uint64_t n) {
  for (MacScope* s = innermost_scope; s; s = s->previous_) s->counter_->add(n);
}

// ---------------------------------------------------------------------------
// Kernels

namespace kernels {

void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n, bool trans_a, bool trans_b) {
  if (!trans_a && !trans_b) {
    constexpr std::size_t kBlockK = 256;
    constexpr std::size_t kBlockN = 512;
    for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
      const std::size_t p1 = std::min(k, p0 + kBlockK);
      for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
        const std::size_t j1 = std::min(n, j0 + kBlockN);
        for (std::size_t i = 0; i < m; ++i) {
          double* ci = c + i * n;
          const double* ai = a + i * k;
          for (std::size_t p = p0; p < p1; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = j0; j < j1; ++j) ci[j] += av * bp[j];
          }
        }
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        c[i * n + j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* ap = a + p * m;
      const double* bp = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = ap[i];
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
        c[i * n + j] += acc;
      }
    }
  }
}

namespace {

struct ConvGeometry {
  std::size_t c_in, t, h, w;
  std::size_t c_out, kt, kh, kw;
};

ConvGeometry conv_geometry(const Shape& x, const Shape& kernel) {
  if (x.size() != 4) throw std::invalid_argument("conv3d input must be [C x T x H x W], got " + shape_str(x));
  if (kernel.size() != 5) {
    throw std::invalid_argument("conv3d kernel must be [C_out x C_in x kt x kh x kw], got " + shape_str(kernel));
  }
  if (kernel[1] != x[0]) {
    throw std::invalid_argument("conv3d channel mismatch: input " + shape_str(x) + ", kernel " + shape_str(kernel));
  }
  for (int i = 2; i < 5; ++i) {
    if (kernel[i] % 2 == 0) {
      throw std::invalid_argument("conv3d kernel extents must be odd for same padding, got " + shape_str(kernel));
    }
  }
  return {x[0], x[1], x[2], x[3], kernel[0], kernel[2], kernel[3], kernel[4]};
}

// Visits every (output position, kernel tap) pair that lands inside the
// input, one contiguous w-run at a time.
template <typename Fn>
void for_each_conv_run(const ConvGeometry& g, Fn&& fn) {
  const long pt = static_cast<long>(g.kt / 2), ph = static_cast<long>(g.kh / 2), pw = static_cast<long>(g.kw / 2);
  const long T = static_cast<long>(g.t), H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  for (std::size_t co = 0; co < g.c_out; ++co) {
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      for (long dt = 0; dt < static_cast<long>(g.kt); ++dt) {
        for (long dh = 0; dh < static_cast<long>(g.kh); ++dh) {
          for (long dw = 0; dw < static_cast<long>(g.kw); ++dw) {
            const std::size_t kidx = (((co * g.c_in + ci) * g.kt + dt) * g.kh + dh) * g.kw + dw;
            const long st = dt - pt, sh = dh - ph, sw = dw - pw;
            const long t0 = std::max(0L, -st), t1 = std::min(T, T - st);
            const long h0 = std::max(0L, -sh), h1 = std::min(H, H - sh);
            const long w0 = std::max(0L, -sw), w1 = std::min(W, W - sw);
            if (w1 <= w0) continue;
            for (long t = t0; t < t1; ++t) {
              for (long h = h0; h < h1; ++h) {
                const std::size_t out_row = ((co * g.t + t) * g.h + h) * g.w;
                const std::size_t in_row = ((ci * g.t + (t + st)) * g.h + (h + sh)) * g.w;
                fn(kidx, out_row + w0, in_row + w0 + sw, static_cast<std::size_t>(w1 - w0));
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

void conv3d_forward(const Tensor& x, const Tensor& kernel, Tensor& out) {
  const ConvGeometry g = conv_geometry(x.shape(), kernel.shape());
  const double* xd = x.data().data();
  const double* kd = kernel.data().data();
  double* od = out.data().data();
  for_each_conv_run(g, [&](std::size_t kidx, std::size_t o, std::size_t i, std::size_t len) {
    const double kv = kd[kidx];
    double* op = od + o;
    const double* ip = xd + i;
    for (std::size_t w = 0; w < len; ++w) op[w] += kv * ip[w];
  });
}

void conv3d_backward_input(const Tensor& grad_out, const Tensor& kernel, Tensor& grad_x) {
  const ConvGeometry g = conv_geometry(grad_x.shape(), kernel.shape());
  const double* gd = grad_out.data().data();
  const double* kd = kernel.data().data();
  double* xd = grad_x.data().data();
  for_each_conv_run(g, [&](std::size_t kidx, std::size_t o, std::size_t i, std::size_t len) {
    const double kv = kd[kidx];
    const double* gp = gd + o;
    double* xp = xd + i;
    for (std::size_t w = 0; w < len; ++w) xp[w] += kv * gp[w];
  });
}

void conv3d_backward_kernel(const Tensor& grad_out, const Tensor& x, Tensor& grad_kernel) {
  const ConvGeometry g = conv_geometry(x.shape(), grad_kernel.shape());
  const double* gd = grad_out.data().data();
  const double* xd = x.data().data();
  double* kd = grad_kernel.data().data();
  for_each_conv_run(g, [&](std::size_t kidx, std::size_t o, std::size_t i, std::size_t len) {
    const double* gp = gd + o;
    const double* xp = xd + i;
    // Four independent partial sums; fixed order, so still deterministic.
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t w = 0;
    for (; w + 4 <= len; w += 4) {
      for (std::size_t j = 0; j < 4; ++j) acc[j] += gp[w + j] * xp[w + j];
    }
    for (; w < len; ++w) acc[0] += gp[w] * xp[w];
    kd[kidx] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
  });
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Counted ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul shape mismatch: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c(Shape{m, n});
  kernels::gemm_accumulate(a.data().data(), b.data().data(), c.data().data(), m, k, n, false, false);
  count_macs(static_cast<std::uint64_t>(m) * n * k);
  return c;
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw std::invalid_argument("batched_matmul shape mismatch: " + shape_str(a.shape()) + " * " +
                                shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor c(Shape{batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    kernels::gemm_accumulate(a.data().data() + i * m * k, b.data().data() + i * k * n,
                             c.data().data() + i * m * n, m, k, n, false, false);
  }
  count_macs(static_cast<std::uint64_t>(batch) * m * n * k);
  return c;
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * n;
    double* out = y.data().data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = std::exp(in[i] - mx);
      sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
  }
  return y;
}

Tensor conv3d(const Tensor& x, const Tensor& kernel) {
  if (x.rank() != 4 || kernel.rank() != 5) {
    throw std::invalid_argument("conv3d expects [C x T x H x W] input and 5-d kernel, got " +
                                shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
  }
  Tensor out(Shape{kernel.dim(0), x.dim(1), x.dim(2), x.dim(3)});
  kernels::conv3d_forward(x, kernel, out);
  count_macs(static_cast<std::uint64_t>(kernel.size()) * x.dim(1) * x.dim(2) * x.dim(3));
  return out;
}

Tensor layer_norm(const Tensor& x, double eps) {
  if (eps < 0.0) throw std::invalid_argument("layer_norm eps must be non-negative");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * n;
    double* out = y.data().data() + r * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += in[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) out[i] = (in[i] - mean) * inv;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Text dump

std::string format_double(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
  return buf;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out << "shape:";
  for (std::size_t d : t.shape()) out << ' ' << d;
  out << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out << ' ';
    out << format_double(t[i]);
  }
  out << '\n';
}

Tensor read_tensor(std::istream& in) {
  std::string line;
  while (std::getline(in, line) && line.empty()) {
  }
  if (line.rfind("shape:", 0) != 0) throw std::runtime_error("tensor dump: expected 'shape:' header, got '" + line + "'");
  std::istringstream header(line.substr(6));
  Shape shape;
  std::size_t d;
  while (header >> d) shape.push_back(d);
  if (!header.eof()) throw std::runtime_error("tensor dump: malformed shape line '" + line + "'");
  const std::size_t n = shape_size(shape);
  std::vector<double> data;
  data.reserve(n);
  std::string tok;
  while (data.size() < n && in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw std::runtime_error("tensor dump: bad value '" + tok + "'");
    data.push_back(v);
  }
  if (data.size() != n) throw std::runtime_error("tensor dump: expected " + std::to_string(n) + " values");
  std::getline(in, line);  // consume the rest of the value line
  return Tensor(std::move(shape), std::move(data));
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace vidrec
