#pragma once

#include "byhd/layers.hpp"

namespace byhd {

struct CoordAttnSpec {
  int channels = 16;
  int reduction = 32;
  int min_hidden = 8;
  Activation act = Activation::hardswish;

  /// Bottleneck width max(min_hidden, channels / reduction).
  int hidden() const;
  void validate() const;
};

template <typename T>
struct CoordEmbedding {
  Tensor<T> z_h;  // (N, C, H, 1): mean over W
  Tensor<T> z_w;  // (N, C, 1, W): mean over H
};

/// Per-axis average pooling with (1, W) and (H, 1) kernels.
template <typename T>
CoordEmbedding<T> ca_embed(const Tensor<T>& x);

/// Coordinate attention. z_h is laid along the W axis (N, C, 1, H) so one
/// shared 1x1 transform covers [z_h, z_w]; norm + activation follow, the
/// result is split back and each half drives a sigmoid gate per axis.
template <typename T>
struct CoordAttention {
  CoordAttnSpec spec;
  Conv<T> f1;
  BatchNorm<T> bn;
  Conv<T> f_h, f_w;

  CoordAttention() = default;
  CoordAttention(Builder<T> b, const CoordAttnSpec& spec);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

struct ScConvSpec {
  int channels = 16;
  int pool_ratio = 4;
  int kernel = 3;

  void validate() const;
};

/// Self-calibrated convolution. Channels split in half; branch A is a plain
/// conv + norm. Branch B gates itself:
///   gate  = sigmoid(x_B + resize(norm(conv(avgpool_r(x_B)))))
///   out_B = conv_norm(conv_norm(x_B * gate))
template <typename T>
struct ScConv {
  ScConvSpec spec;
  ConvBnAct<T> k1, k2, k3, k4;

  ScConv() = default;
  ScConv(Builder<T> b, const ScConvSpec& spec);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

struct SppfScSpec {
  int c_in = 32;
  int c_out = 32;
  int pool_kernel = 5;
  bool use_sc = true;
  ScConvSpec sc;  // channels are forced to the hidden width c_in / 2

  int hidden() const { return c_in / 2; }
  void validate() const;
};

/// cv1 (1x1 to c_in/2) -> optional self-calibrated conv -> three cascaded
/// stride-1 max pools -> cv2 (1x1 over the 4-way concat).
template <typename T>
struct SppfSc {
  SppfScSpec spec;
  ConvBnAct<T> cv1, cv2;
  ScConv<T> sc;

  SppfSc() = default;
  SppfSc(Builder<T> b, const SppfScSpec& spec, Activation act = Activation::silu);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

}  // namespace byhd
