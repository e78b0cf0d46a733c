#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vidrec {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. A scalar is a tensor of shape {1}.
class Tensor {
 public:
  Tensor() : Tensor(Shape{1}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Multi-index access; the number of indices must equal rank().
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  double item() const;

  Tensor reshaped(Shape shape) const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

bool operator==(const Tensor& a, const Tensor& b);

// Largest elementwise |a - b|; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

// Counts scalar multiply-accumulates performed by the counted kernels
// (matmul, batched_matmul, conv3d) on the current thread.
class MacCounter {
 public:
  std::uint64_t macs() const { return macs_; }
  void add(std::uint64_t n) { macs_ += n; }
  void reset() { macs_ = 0; }

 private:
  std::uint64_t macs_ = 0;
};

// Routes MAC counts from kernels on this thread into `counter` while alive.
// Scopes nest; every enclosing scope's counter also receives the counts.
class MacScope {
 public:
  explicit MacScope(MacCounter& counter);
  ~MacScope();
  MacScope(const MacScope&) = delete;
  MacScope& operator=(const MacScope&) = delete;

 private:
  friend void count_macs(std::uint64_t n);
  MacCounter* counter_;
  MacScope* previous_;
};

void count_macs(std::uint64_t n);

// a[m x k] * b[k x n]. Counts m*n*k MACs.
Tensor matmul(const Tensor& a, const Tensor& b);

// a[B x m x k] * b[B x k x n] -> [B x m x n]. Counts B*m*n*k MACs.
Tensor batched_matmul(const Tensor& a, const Tensor& b);

Tensor softmax_lastdim(const Tensor& x);

// "Same" zero-padded cross-correlation.
// x: [C_in x T x H x W], kernel: [C_out x C_in x kt x kh x kw], all kernel
// extents odd. Counts C_out*C_in*kt*kh*kw*T*H*W MACs.
Tensor conv3d(const Tensor& x, const Tensor& kernel);

// Normalizes each last-dim slice to zero mean and unit variance.
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

// Uncounted kernels shared with the backward passes.
namespace kernels {

// c[m x n] += a[m x k] * b[k x n], with optional transposition of a or b
// (a stored [k x m] when trans_a, b stored [n x k] when trans_b).
void gemm_accumulate(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n,
                     bool trans_a, bool trans_b);

void conv3d_forward(const Tensor& x, const Tensor& kernel, Tensor& out);
void conv3d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                           Tensor& grad_x);
void conv3d_backward_kernel(const Tensor& grad_out, const Tensor& x,
                            Tensor& grad_kernel);

}  // namespace kernels

// Golden-file text format: a `shape: d0 d1 ...` line, then the values in
// row-major order with %.17g precision.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
std::string format_double(double value, int precision = 17);

// Keeps freed tensor buffers in the process heap so the next allocation of
// the same size does not fault in fresh pages. glibc only; no-op elsewhere.
void retain_freed_memory();

}  // namespace vidrec
