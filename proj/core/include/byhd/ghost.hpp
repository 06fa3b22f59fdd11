#pragma once

#include <cstdint>

#include "byhd/layers.hpp"

namespace byhd {

struct DfcAttentionSpec {
  int strip_len_h = 5;
  int strip_len_w = 5;
  int downsample = 2;

  void validate() const;
};

struct GhostModuleSpec {
  int c_in = 8;
  int c_out = 16;
  int c_mid = 8;
  int dw_kernel = 3;
  bool use_dfc = false;
  DfcAttentionSpec dfc;
  Activation act = Activation::silu;  // primary branch; identity for projection modules

  /// c_mid defaults to c_out / 2.
  static GhostModuleSpec make(int c_in, int c_out, bool use_dfc = false);
  void validate() const;
};

/// Decoupled fully connected attention: average-pool downsample, 1x1 conv,
/// depthwise strip convolutions along H (strip_len_h x 1) then along W
/// (1 x strip_len_w), each followed by batch norm, then sigmoid and nearest
/// resize back to the input's spatial extent.
template <typename T>
struct DfcAttention {
  DfcAttentionSpec spec;
  ConvBnAct<T> reduce, strip_h, strip_w;

  DfcAttention() = default;
  DfcAttention(Builder<T> b, int c_in, int c_out, const DfcAttentionSpec& spec);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

/// Pointwise primary branch Y' = X * F_1x1 (conv, norm, activation), cheap
/// depthwise branch Y' * F_dp (conv, norm), concatenated. With DFC the result
/// is multiplied by the attention gate computed from the module input.
template <typename T>
struct GhostModule {
  GhostModuleSpec spec;
  ConvBnAct<T> primary, cheap;
  DfcAttention<T> dfc;

  GhostModule() = default;
  GhostModule(Builder<T> b, const GhostModuleSpec& spec);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

struct GhostBottleneckSpec {
  int c_in = 16;
  int c_out = 16;
  int stride = 1;
  int dw_kernel = 3;
  bool use_dfc = true;
  DfcAttentionSpec dfc;
  Activation act = Activation::silu;

  GhostModuleSpec spec1() const;  // with DFC, expands to c_out / 2
  GhostModuleSpec spec2() const;  // without DFC or activation, projects to c_out
  bool identity_shortcut() const { return stride == 1 && c_in == c_out; }
  void validate() const;
};

/// ghost2(optional stride-2 depthwise(ghost1(x))) + shortcut(x). The shortcut
/// is the identity when stride is 1 and channels match, otherwise a depthwise
/// (stride) conv + norm followed by a pointwise conv + norm.
template <typename T>
struct GhostBottleneck {
  GhostBottleneckSpec spec;
  GhostModule<T> ghost1, ghost2;
  ConvBnAct<T> dw;
  ConvBnAct<T> short_dw, short_pw;

  GhostBottleneck() = default;
  GhostBottleneck(Builder<T> b, const GhostBottleneckSpec& spec);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

/// C3 with ghost bottlenecks inside.
template <typename T>
struct GhostC3 {
  ConvBnAct<T> cv1, cv2, cv3;
  std::vector<GhostBottleneck<T>> m;

  GhostC3() = default;
  GhostC3(Builder<T> b, int c_in, int c_out, int depth, bool use_dfc, Activation act);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

struct ParamCounts {
  std::int64_t p_conv = 0;
  std::int64_t p_ghost = 0;
};

/// Literal evaluation of the standard-conv and ghost-module count formulas:
///   p_conv  = C*C'*k^2 + 2*C'
///   p_ghost = (C*C_mid*k^2 + 2*C_mid)*2 + C_mid*C'*k^2 + 2*C'
ParamCounts param_count_formula(std::int64_t c, std::int64_t c_prime, std::int64_t c_mid,
                                std::int64_t k);

}  // namespace byhd
