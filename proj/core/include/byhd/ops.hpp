#pragma once

#include <cstdint>
#include <vector>

#include "byhd/tensor.hpp"

// Differentiable primitives. Every function records a backward closure on the
// thread's tape when any input requires grad and grad mode is enabled.
// Implementations are explicitly instantiated for float and double.

namespace byhd {

struct Conv2dOptions {
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;
  int groups = 1;

  static Conv2dOptions make(int stride, int pad, int groups = 1) {
    return {stride, stride, pad, pad, groups};
  }
};

/// 2-D cross-correlation, NCHW input, (C_out, C_in/groups, kh, kw) weight.
/// `bias` may be an undefined tensor. Zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& options);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int pad, int groups) {
  return conv2d(x, weight, bias, Conv2dOptions::make(stride, pad, groups));
}

std::int64_t conv_out_extent(std::int64_t in, int kernel, int stride, int pad);

enum class PoolKind { max, avg };

struct Pool2dOptions {
  PoolKind kind = PoolKind::max;
  int kernel_h = 2;
  int kernel_w = 2;
  int stride_h = 2;
  int stride_w = 2;
  int pad_h = 0;
  int pad_w = 0;
};

/// Rectangular pooling. Average pooling divides by the number of in-bounds
/// elements of each window; max pooling treats padding as -inf.
template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, const Pool2dOptions& options);

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int kernel, int stride, int pad) {
  return pool2d(x, Pool2dOptions{PoolKind::max, kernel, kernel, stride, stride, pad, pad});
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int kernel_h, int kernel_w, int stride_h, int stride_w) {
  return pool2d(x, Pool2dOptions{PoolKind::avg, kernel_h, kernel_w, stride_h, stride_w, 0, 0});
}

enum class Activation { identity, sigmoid, relu, silu, hardswish };

const char* activation_name(Activation kind);

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return activation(x, Activation::sigmoid);
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return activation(x, Activation::relu);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis);

/// `length` elements starting at `start` along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);

/// Repeats size-1 axes of `x` up to `shape`; the only broadcasting available.
template <typename T>
Tensor<T> expand(const Tensor<T>& x, const Shape& shape);

/// Gathers `x.data[indices[i]]` into a tensor of `shape`.
template <typename T>
Tensor<T> take(const Tensor<T>& x, const std::vector<std::int64_t>& indices, const Shape& shape);

/// Nearest-neighbour resize of the two trailing axes: src = floor(dst * in / out).
template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);

struct BatchNormState {
  double momentum = 0.1;
  double eps = 1e-5;
};

enum class NormMode { train, eval };

/// Per-channel batch normalization over (N, H, W). In train mode the batch
/// statistics normalize and, when `update_stats` is set, the running buffers
/// are blended with `momentum` (unbiased variance). Eval mode reads the
/// running buffers.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, NormMode mode,
                      bool update_stats = true, const BatchNormState& state = {});

// Elementwise, identical shapes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T>
Tensor<T> atan(const Tensor<T>& x);
template <typename T>
Tensor<T> square(const Tensor<T>& x);

/// Sum of all elements as a shape-{1} tensor (accumulated in double).
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// sum(weight * bce(sigmoid(logits), targets)) / normalizer, numerically
/// stable form. `weights` may be undefined (all ones). Only `logits` is
/// differentiated.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets,
                          const Tensor<T>& weights, double normalizer);

// ---------------------------------------------------------------------------
// Instrumentation.

/// Accumulates 2*k^2*(C_in/groups)*C_out*H_out*W_out per conv2d call while alive.
class FlopCounter {
 public:
  FlopCounter();
  ~FlopCounter();
  FlopCounter(const FlopCounter&) = delete;
  FlopCounter& operator=(const FlopCounter&) = delete;
  std::int64_t flops() const { return flops_; }
  void add(std::int64_t value) { flops_ += value; }

 private:
  FlopCounter* previous_;
  std::int64_t flops_ = 0;
};

/// When enabled (default), every op checks its output for NaN/Inf and throws
/// NumericError naming the op.
void set_finite_checks(bool enabled);
bool finite_checks();

}  // namespace byhd
