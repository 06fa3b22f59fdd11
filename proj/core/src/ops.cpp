#include "byhd/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <type_traits>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

namespace byhd {
namespace {

std::atomic<bool> g_finite_checks{true};
thread_local FlopCounter* t_flop_counter = nullptr;

template <typename T>
bool tracking(std::initializer_list<const Tensor<T>*> inputs) {
  if (!grad_enabled()) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record(std::function<void()> entry) {
  Tape<T>::current().record(std::move(entry));
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!g_finite_checks.load(std::memory_order_relaxed)) return;
  // All-ones exponent bits mark Inf and NaN; an integer OR reduction vectorizes.
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits exp_mask = sizeof(T) == 4 ? Bits(0x7f800000u) : Bits(0x7ff0000000000000ull);
  const T* p = t.ptr();
  const auto n = t.numel();
  Bits bad = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    Bits b;
    std::memcpy(&b, p + i, sizeof b);
    bad |= static_cast<Bits>((b & exp_mask) == exp_mask);
  }
  if (bad != 0) throw NumericError(std::string(op) + ": non-finite output");
}

template <typename T>
void require_rank(const Tensor<T>& x, int rank, const char* op) {
  if (!x.defined()) throw ContractError(std::string(op) + ": undefined tensor");
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.defined() || !b.defined()) throw ContractError(std::string(op) + ": undefined tensor");
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

/// Wraps a tensor's storage for a backward closure; grad is allocated lazily.
template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

template <typename T>
T* grad_of(const ImplPtr<T>& impl) {
  impl->ensure_grad();
  return impl->grad.data();
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

struct ConvGeometry {
  std::int64_t n, c, h, w;
  std::int64_t co, cg, kh, kw;
  std::int64_t ho, wo;
  int sh, sw, ph, pw, groups;

  std::int64_t cog() const { return co / groups; }
  std::int64_t patch() const { return cg * kh * kw; }
  std::int64_t positions() const { return n * ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && sh == 1 && sw == 1 && ph == 0 && pw == 0; }
  bool depthwise() const { return groups == c && cg == 1 && co == c; }
};

// col layout: (patch, n * ho * wo) for channels [g*cg, (g+1)*cg).
template <typename T>
void im2col(const ConvGeometry& g, const T* x, int group, T* col) {
  const std::int64_t plane = g.h * g.w;
  const std::int64_t out_plane = g.ho * g.wo;
  const std::int64_t cols = g.positions();
  if (g.pointwise()) {
    for (std::int64_t c = 0; c < g.cg; ++c) {
      for (std::int64_t n = 0; n < g.n; ++n) {
        const T* src = x + (n * g.c + group * g.cg + c) * plane;
        std::copy(src, src + plane, col + c * cols + n * out_plane);
      }
    }
    return;
  }
  for (std::int64_t c = 0; c < g.cg; ++c) {
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (std::int64_t n = 0; n < g.n; ++n) {
          const T* src = x + (n * g.c + group * g.cg + c) * plane;
          T* dst = row + n * out_plane;
          for (std::int64_t oy = 0; oy < g.ho; ++oy) {
            const std::int64_t iy = oy * g.sh - g.ph + ky;
            T* drow = dst + oy * g.wo;
            if (iy < 0 || iy >= g.h) {
              std::fill(drow, drow + g.wo, T(0));
              continue;
            }
            const T* srow = src + iy * g.w;
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox * g.sw - g.pw + kx;
              drow[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, int group, T* dx) {
  const std::int64_t plane = g.h * g.w;
  const std::int64_t out_plane = g.ho * g.wo;
  const std::int64_t cols = g.positions();
  if (g.pointwise()) {
    for (std::int64_t c = 0; c < g.cg; ++c) {
      for (std::int64_t n = 0; n < g.n; ++n) {
        T* dst = dx + (n * g.c + group * g.cg + c) * plane;
        const T* src = col + c * cols + n * out_plane;
        for (std::int64_t p = 0; p < plane; ++p) dst[p] += src[p];
      }
    }
    return;
  }
  for (std::int64_t c = 0; c < g.cg; ++c) {
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (std::int64_t n = 0; n < g.n; ++n) {
          T* dst = dx + (n * g.c + group * g.cg + c) * plane;
          const T* src = row + n * out_plane;
          for (std::int64_t oy = 0; oy < g.ho; ++oy) {
            const std::int64_t iy = oy * g.sh - g.ph + ky;
            if (iy < 0 || iy >= g.h) continue;
            T* drow = dst + iy * g.w;
            const T* srow = src + oy * g.wo;
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox * g.sw - g.pw + kx;
              if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_forward(const ConvGeometry& g, const T* x, const T* w, const T* b, T* out) {
  const std::int64_t ksize = g.kh * g.kw;
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t c = 0; c < g.c; ++c) {
      const T* src = x + (n * g.c + c) * g.h * g.w;
      const T* wk = w + c * ksize;
      T* dst = out + (n * g.c + c) * g.ho * g.wo;
      const T bias = b != nullptr ? b[c] : T(0);
      for (std::int64_t oy = 0; oy < g.ho; ++oy) {
        for (std::int64_t ox = 0; ox < g.wo; ++ox) {
          T acc = bias;
          for (std::int64_t ky = 0; ky < g.kh; ++ky) {
            const std::int64_t iy = oy * g.sh - g.ph + ky;
            if (iy < 0 || iy >= g.h) continue;
            const T* srow = src + iy * g.w;
            const T* wrow = wk + ky * g.kw;
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
              const std::int64_t ix = ox * g.sw - g.pw + kx;
              if (ix >= 0 && ix < g.w) acc += wrow[kx] * srow[ix];
            }
          }
          dst[oy * g.wo + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(const ConvGeometry& g, const T* x, const T* w, const T* dout, T* dx,
                        T* dw) {
  const std::int64_t ksize = g.kh * g.kw;
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t c = 0; c < g.c; ++c) {
      const T* src = x + (n * g.c + c) * g.h * g.w;
      const T* wk = w + c * ksize;
      const T* go = dout + (n * g.c + c) * g.ho * g.wo;
      T* gx = dx != nullptr ? dx + (n * g.c + c) * g.h * g.w : nullptr;
      T* gw = dw != nullptr ? dw + c * ksize : nullptr;
      for (std::int64_t oy = 0; oy < g.ho; ++oy) {
        for (std::int64_t ox = 0; ox < g.wo; ++ox) {
          const T d = go[oy * g.wo + ox];
          if (d == T(0)) continue;
          for (std::int64_t ky = 0; ky < g.kh; ++ky) {
            const std::int64_t iy = oy * g.sh - g.ph + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
              const std::int64_t ix = ox * g.sw - g.pw + kx;
              if (ix < 0 || ix >= g.w) continue;
              if (gx != nullptr) gx[iy * g.w + ix] += wk[ky * g.kw + kx] * d;
              if (gw != nullptr) gw[ky * g.kw + kx] += src[iy * g.w + ix] * d;
            }
          }
        }
      }
    }
  }
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_op(const Tensor<T>& x, const char* name, Fwd fwd, Bwd bwd) {
  if (!x.defined()) throw ContractError(std::string(name) + ": undefined tensor");
  Tensor<T> out(x.shape());
  const T* xp = x.ptr();
  T* op = out.mutable_ptr();
  const auto n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) op[i] = fwd(xp[i]);
  check_finite(out, name);
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([xi = x.impl(), oi = out.impl(), bwd] {
      if (oi->grad.empty()) return;
      T* gx = grad_of(xi);
      const auto count = oi->data.size();
      for (std::size_t i = 0; i < count; ++i) {
        gx[i] += oi->grad[i] * bwd(xi->data[i], oi->data[i]);
      }
    });
  }
  return out;
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd, Bwd bwd) {
  require_same_shape(a, b, name);
  Tensor<T> out(a.shape());
  const auto n = a.numel();
  const T* ap = a.ptr();
  const T* bp = b.ptr();
  T* op = out.mutable_ptr();
  for (std::int64_t i = 0; i < n; ++i) op[i] = fwd(ap[i], bp[i]);
  check_finite(out, name);
  if (tracking<T>({&a, &b})) {
    out.set_requires_grad(true);
    record<T>([ai = a.impl(), bi = b.impl(), oi = out.impl(), bwd] {
      if (oi->grad.empty()) return;
      T* ga = ai->requires_grad ? grad_of(ai) : nullptr;
      T* gb = bi->requires_grad ? grad_of(bi) : nullptr;
      const auto count = oi->data.size();
      for (std::size_t i = 0; i < count; ++i) {
        T da = T(0);
        T db = T(0);
        bwd(ai->data[i], bi->data[i], oi->data[i], da, db);
        const T g = oi->grad[i];
        if (ga != nullptr) ga[i] += g * da;
        if (gb != nullptr) gb[i] += g * db;
      }
    });
  }
  return out;
}

std::int64_t outer_extent(const Shape& shape, int axis) {
  std::int64_t r = 1;
  for (int i = 0; i < axis; ++i) r *= shape[static_cast<std::size_t>(i)];
  return r;
}

std::int64_t inner_extent(const Shape& shape, int axis) {
  std::int64_t r = 1;
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) r *= shape[i];
  return r;
}

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError(std::string(op) + ": axis out of range");
  return axis;
}

}  // namespace

// ---------------------------------------------------------------------------

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks() { return g_finite_checks.load(); }

FlopCounter::FlopCounter() : previous_(t_flop_counter) { t_flop_counter = this; }
FlopCounter::~FlopCounter() { t_flop_counter = previous_; }

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::identity:
      return "identity";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::relu:
      return "relu";
    case Activation::silu:
      return "silu";
    case Activation::hardswish:
      return "hardswish";
  }
  return "unknown";
}

std::int64_t conv_out_extent(std::int64_t in, int kernel, int stride, int pad) {
  return (in + 2 * static_cast<std::int64_t>(pad) - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& o) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  if (o.stride_h < 1 || o.stride_w < 1 || o.pad_h < 0 || o.pad_w < 0 || o.groups < 1) {
    throw ConfigError("conv2d: stride must be >= 1, pad >= 0, groups >= 1");
  }
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.co = weight.dim(0);
  g.cg = weight.dim(1);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.sh = o.stride_h;
  g.sw = o.stride_w;
  g.ph = o.pad_h;
  g.pw = o.pad_w;
  g.groups = o.groups;
  if (g.c % g.groups != 0 || g.co % g.groups != 0) {
    throw ConfigError("conv2d: groups=" + std::to_string(g.groups) +
                      " does not divide channels " + std::to_string(g.c) + "->" +
                      std::to_string(g.co));
  }
  if (g.cg != g.c / g.groups) {
    throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                         shape_str(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.co)) {
    throw DimensionError("conv2d: bias must have shape {" + std::to_string(g.co) + "}");
  }
  g.ho = conv_out_extent(g.h, static_cast<int>(g.kh), g.sh, g.ph);
  g.wo = conv_out_extent(g.w, static_cast<int>(g.kw), g.sw, g.pw);
  if (g.ho < 1 || g.wo < 1) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  }
  if (t_flop_counter != nullptr) {
    t_flop_counter->add(2 * g.kh * g.kw * g.cg * g.co * g.ho * g.wo * g.n);
  }

  Tensor<T> out(Shape{g.n, g.co, g.ho, g.wo});
  const bool track = tracking<T>({&x, &weight, &bias});
  const T* bp = bias.defined() ? bias.ptr() : nullptr;

  if (g.depthwise()) {
    depthwise_forward(g, x.ptr(), weight.ptr(), bp, out.mutable_ptr());
    check_finite(out, "conv2d");
    if (track) {
      out.set_requires_grad(true);
      record<T>([g, xi = x.impl(), wi = weight.impl(),
                 bi = bias.defined() ? bias.impl() : ImplPtr<T>{}, oi = out.impl()] {
        if (oi->grad.empty()) return;
        T* dx = xi->requires_grad ? grad_of(xi) : nullptr;
        T* dw = wi->requires_grad ? grad_of(wi) : nullptr;
        depthwise_backward(g, xi->data.data(), wi->data.data(), oi->grad.data(), dx, dw);
        if (bi && bi->requires_grad) {
          T* db = grad_of(bi);
          const std::int64_t plane = g.ho * g.wo;
          for (std::int64_t n = 0; n < g.n; ++n) {
            for (std::int64_t c = 0; c < g.co; ++c) {
              const T* go = oi->grad.data() + (n * g.co + c) * plane;
              T s = T(0);
              for (std::int64_t p = 0; p < plane; ++p) s += go[p];
              db[c] += s;
            }
          }
        }
      });
    }
    return out;
  }

  const std::int64_t patch = g.patch();
  const std::int64_t cols = g.positions();
  const std::int64_t cog = g.cog();
  const std::int64_t out_plane = g.ho * g.wo;
  auto col = std::make_shared<std::vector<T>>(static_cast<std::size_t>(g.groups * patch * cols));
  std::vector<T> tmp(static_cast<std::size_t>(cog * cols));
  T* op = out.mutable_ptr();
  for (int grp = 0; grp < g.groups; ++grp) {
    T* gcol = col->data() + grp * patch * cols;
    im2col(g, x.ptr(), grp, gcol);
    const T* wg = weight.ptr() + grp * cog * patch;
    gemm(false, false, static_cast<int>(cog), static_cast<int>(cols), static_cast<int>(patch), T(1),
         wg, static_cast<int>(patch), gcol, static_cast<int>(cols), T(0), tmp.data(),
         static_cast<int>(cols));
    for (std::int64_t oc = 0; oc < cog; ++oc) {
      const std::int64_t channel = grp * cog + oc;
      const T b = bp != nullptr ? bp[channel] : T(0);
      for (std::int64_t n = 0; n < g.n; ++n) {
        const T* src = tmp.data() + oc * cols + n * out_plane;
        T* dst = op + (n * g.co + channel) * out_plane;
        for (std::int64_t p = 0; p < out_plane; ++p) dst[p] = src[p] + b;
      }
    }
  }
  check_finite(out, "conv2d");
  if (track) {
    out.set_requires_grad(true);
    // The im2col buffer is only needed for the weight gradient.
    std::shared_ptr<std::vector<T>> saved = weight.requires_grad() ? col : nullptr;
    record<T>([g, saved, xi = x.impl(), wi = weight.impl(),
               bi = bias.defined() ? bias.impl() : ImplPtr<T>{}, oi = out.impl()] {
      if (oi->grad.empty()) return;
      const std::int64_t patch_ = g.patch();
      const std::int64_t cols_ = g.positions();
      const std::int64_t cog_ = g.cog();
      const std::int64_t plane = g.ho * g.wo;
      std::vector<T> dtmp(static_cast<std::size_t>(cog_ * cols_));
      std::vector<T> dcol;
      if (xi->requires_grad) dcol.resize(static_cast<std::size_t>(patch_ * cols_));
      T* dx = xi->requires_grad ? grad_of(xi) : nullptr;
      T* dw = wi->requires_grad ? grad_of(wi) : nullptr;
      T* db = (bi && bi->requires_grad) ? grad_of(bi) : nullptr;
      for (int grp = 0; grp < g.groups; ++grp) {
        for (std::int64_t oc = 0; oc < cog_; ++oc) {
          const std::int64_t channel = grp * cog_ + oc;
          T s = T(0);
          for (std::int64_t n = 0; n < g.n; ++n) {
            const T* src = oi->grad.data() + (n * g.co + channel) * plane;
            T* dst = dtmp.data() + oc * cols_ + n * plane;
            for (std::int64_t p = 0; p < plane; ++p) {
              dst[p] = src[p];
              s += src[p];
            }
          }
          if (db != nullptr) db[channel] += s;
        }
        if (dw != nullptr) {
          const T* gcol = saved->data() + grp * patch_ * cols_;
          gemm(false, true, static_cast<int>(cog_), static_cast<int>(patch_),
               static_cast<int>(cols_), T(1), dtmp.data(), static_cast<int>(cols_), gcol,
               static_cast<int>(cols_), T(1), dw + grp * cog_ * patch_,
               static_cast<int>(patch_));
        }
        if (dx != nullptr) {
          const T* wg = wi->data.data() + grp * cog_ * patch_;
          gemm(true, false, static_cast<int>(patch_), static_cast<int>(cols_),
               static_cast<int>(cog_), T(1), wg, static_cast<int>(patch_), dtmp.data(),
               static_cast<int>(cols_), T(0), dcol.data(), static_cast<int>(cols_));
          col2im_add(g, dcol.data(), grp, dx);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, const Pool2dOptions& o) {
  require_rank(x, 4, "pool2d");
  if (o.kernel_h < 1 || o.kernel_w < 1 || o.stride_h < 1 || o.stride_w < 1 || o.pad_h < 0 ||
      o.pad_w < 0) {
    throw ConfigError("pool2d: kernel/stride must be >= 1 and pad >= 0");
  }
  if (o.pad_h >= o.kernel_h || o.pad_w >= o.kernel_w) {
    throw ConfigError("pool2d: padding must be smaller than the kernel");
  }
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t ho = conv_out_extent(h, o.kernel_h, o.stride_h, o.pad_h);
  const std::int64_t wo = conv_out_extent(w, o.kernel_w, o.stride_w, o.pad_w);
  if (ho < 1 || wo < 1) {
    throw DimensionError("pool2d: kernel larger than padded input " + shape_str(x.shape()));
  }
  Tensor<T> out(Shape{n, c, ho, wo});
  const bool is_max = o.kind == PoolKind::max;
  auto argmax = std::make_shared<std::vector<std::int64_t>>();
  if (is_max) argmax->resize(static_cast<std::size_t>(out.numel()));
  const T* xp = x.ptr();
  T* op = out.mutable_ptr();
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    const T* src = xp + plane * h * w;
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      const std::int64_t y0 = std::max<std::int64_t>(oy * o.stride_h - o.pad_h, 0);
      const std::int64_t y1 = std::min<std::int64_t>(oy * o.stride_h - o.pad_h + o.kernel_h, h);
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        const std::int64_t x0 = std::max<std::int64_t>(ox * o.stride_w - o.pad_w, 0);
        const std::int64_t x1 = std::min<std::int64_t>(ox * o.stride_w - o.pad_w + o.kernel_w, w);
        const std::int64_t oidx = (plane * ho + oy) * wo + ox;
        if (is_max) {
          T best = -std::numeric_limits<T>::infinity();
          std::int64_t best_idx = -1;
          for (std::int64_t yy = y0; yy < y1; ++yy) {
            for (std::int64_t xx = x0; xx < x1; ++xx) {
              const T v = src[yy * w + xx];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = plane * h * w + yy * w + xx;
              }
            }
          }
          op[oidx] = best;
          (*argmax)[static_cast<std::size_t>(oidx)] = best_idx;
        } else {
          double acc = 0.0;
          for (std::int64_t yy = y0; yy < y1; ++yy) {
            for (std::int64_t xx = x0; xx < x1; ++xx) acc += src[yy * w + xx];
          }
          op[oidx] = static_cast<T>(acc / static_cast<double>((y1 - y0) * (x1 - x0)));
        }
      }
    }
  }
  check_finite(out, "pool2d");
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([o, n, c, h, w, ho, wo, argmax, xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* dx = grad_of(xi);
      const T* go = oi->grad.data();
      if (o.kind == PoolKind::max) {
        for (std::size_t i = 0; i < argmax->size(); ++i) dx[(*argmax)[i]] += go[i];
        return;
      }
      for (std::int64_t plane = 0; plane < n * c; ++plane) {
        T* dst = dx + plane * h * w;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          const std::int64_t y0 = std::max<std::int64_t>(oy * o.stride_h - o.pad_h, 0);
          const std::int64_t y1 =
              std::min<std::int64_t>(oy * o.stride_h - o.pad_h + o.kernel_h, h);
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const std::int64_t x0 = std::max<std::int64_t>(ox * o.stride_w - o.pad_w, 0);
            const std::int64_t x1 =
                std::min<std::int64_t>(ox * o.stride_w - o.pad_w + o.kernel_w, w);
            const T share = go[(plane * ho + oy) * wo + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
            for (std::int64_t yy = y0; yy < y1; ++yy) {
              for (std::int64_t xx = x0; xx < x1; ++xx) dst[yy * w + xx] += share;
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  switch (kind) {
    case Activation::identity:
      return unary_op(
          x, "identity", [](T v) { return v; }, [](T, T) { return T(1); });
    case Activation::sigmoid:
      return unary_op(
          x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
          [](T, T y) { return y * (T(1) - y); });
    case Activation::relu:
      return unary_op(
          x, "relu", [](T v) { return v > T(0) ? v : T(0); },
          [](T v, T) { return v > T(0) ? T(1) : T(0); });
    case Activation::silu:
      return unary_op(
          x, "silu", [](T v) { return v / (T(1) + std::exp(-v)); },
          [](T v, T) {
            const T s = T(1) / (T(1) + std::exp(-v));
            return s * (T(1) + v * (T(1) - s));
          });
    case Activation::hardswish:
      return unary_op(
          x, "hardswish",
          [](T v) {
            if (v <= T(-3)) return T(0);
            if (v >= T(3)) return v;
            return v * (v + T(3)) / T(6);
          },
          [](T v, T) {
            if (v < T(-3)) return T(0);
            if (v > T(3)) return T(1);
            return (T(2) * v + T(3)) / T(6);
          });
  }
  throw ConfigError("activation: unknown kind");
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) throw ContractError("concat: empty input list");
  const int rank = xs.front().rank();
  axis = normalize_axis(axis, rank, "concat");
  Shape shape = xs.front().shape();
  std::int64_t total = 0;
  for (const auto& t : xs) {
    if (t.rank() != rank) throw DimensionError("concat: rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && t.dim(i) != shape[static_cast<std::size_t>(i)]) {
        throw DimensionError("concat: non-axis extent mismatch " + shape_str(t.shape()) + " vs " +
                             shape_str(shape));
      }
    }
    total += t.dim(axis);
  }
  shape[static_cast<std::size_t>(axis)] = total;
  Tensor<T> out(shape);
  const std::int64_t outer = outer_extent(shape, axis);
  const std::int64_t inner = inner_extent(shape, axis);
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& t : xs) {
    offsets.push_back(offset);
    const std::int64_t chunk = t.dim(axis) * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy(t.ptr() + o * chunk, t.ptr() + (o + 1) * chunk,
                out.mutable_ptr() + o * total * inner + offset * inner);
    }
    offset += t.dim(axis);
  }
  bool track = false;
  for (const auto& t : xs) track = track || tracking<T>({&t});
  if (track) {
    out.set_requires_grad(true);
    std::vector<ImplPtr<T>> impls;
    std::vector<std::int64_t> extents;
    for (const auto& t : xs) {
      impls.push_back(t.impl());
      extents.push_back(t.dim(axis));
    }
    record<T>([impls, extents, offsets, outer, inner, total, oi = out.impl()] {
      if (oi->grad.empty()) return;
      for (std::size_t k = 0; k < impls.size(); ++k) {
        if (!impls[k]->requires_grad) continue;
        T* g = grad_of(impls[k]);
        const std::int64_t chunk = extents[k] * inner;
        for (std::int64_t o = 0; o < outer; ++o) {
          const T* src = oi->grad.data() + o * total * inner + offsets[k] * inner;
          T* dst = g + o * chunk;
          for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length) {
  if (!x.defined()) throw ContractError("slice: undefined tensor");
  axis = normalize_axis(axis, x.rank(), "slice");
  const std::int64_t extent = x.dim(axis);
  if (start < 0 || length < 1 || start + length > extent) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside extent " +
                         std::to_string(extent));
  }
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = length;
  Tensor<T> out(shape);
  const std::int64_t outer = outer_extent(shape, axis);
  const std::int64_t inner = inner_extent(shape, axis);
  for (std::int64_t o = 0; o < outer; ++o) {
    const T* src = x.ptr() + (o * extent + start) * inner;
    std::copy(src, src + length * inner, out.mutable_ptr() + o * length * inner);
  }
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([outer, inner, extent, start, length, xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* g = grad_of(xi);
      for (std::int64_t o = 0; o < outer; ++o) {
        const T* src = oi->grad.data() + o * length * inner;
        T* dst = g + (o * extent + start) * inner;
        for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (!x.defined()) throw ContractError("reshape: undefined tensor");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Tensor<T> out(shape, std::vector<T>(x.data().begin(), x.data().end()));
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* g = grad_of(xi);
      for (std::size_t i = 0; i < oi->grad.size(); ++i) g[i] += oi->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> expand(const Tensor<T>& x, const Shape& shape) {
  if (!x.defined()) throw ContractError("expand: undefined tensor");
  if (static_cast<std::size_t>(x.rank()) != shape.size()) {
    throw DimensionError("expand: rank mismatch");
  }
  const std::size_t rank = shape.size();
  std::vector<std::int64_t> in_stride(rank, 0);
  std::int64_t s = 1;
  for (std::size_t i = rank; i-- > 0;) {
    const auto ext = x.shape()[i];
    if (ext != shape[i] && ext != 1) {
      throw DimensionError("expand: cannot expand " + shape_str(x.shape()) + " to " +
                           shape_str(shape));
    }
    in_stride[i] = ext == 1 ? 0 : s;
    s *= ext;
  }
  Tensor<T> out(shape);
  const std::int64_t total = out.numel();
  auto map = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(total));
  std::vector<std::int64_t> counter(rank, 0);
  std::int64_t src = 0;
  for (std::int64_t i = 0; i < total; ++i) {
    (*map)[static_cast<std::size_t>(i)] = src;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      src += in_stride[d];
      if (counter[d] < shape[d]) break;
      src -= in_stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  const T* xp = x.ptr();
  T* op = out.mutable_ptr();
  for (std::int64_t i = 0; i < total; ++i) op[i] = xp[(*map)[static_cast<std::size_t>(i)]];
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([map, xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* g = grad_of(xi);
      for (std::size_t i = 0; i < map->size(); ++i) g[(*map)[i]] += oi->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> take(const Tensor<T>& x, const std::vector<std::int64_t>& indices, const Shape& shape) {
  if (!x.defined()) throw ContractError("take: undefined tensor");
  if (shape_numel(shape) != static_cast<std::int64_t>(indices.size())) {
    throw DimensionError("take: shape " + shape_str(shape) + " does not match index count");
  }
  Tensor<T> out(shape);
  const auto n = x.numel();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= n) throw DimensionError("take: index out of range");
    out.mutable_ptr()[i] = x.ptr()[indices[i]];
  }
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([indices, xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* g = grad_of(xi);
      for (std::size_t i = 0; i < indices.size(); ++i) g[indices[i]] += oi->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  require_rank(x, 4, "resize_nearest");
  if (out_h < 1 || out_w < 1) throw DimensionError("resize_nearest: empty target extent");
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> out(Shape{n, c, out_h, out_w});
  std::vector<std::int64_t> ys(static_cast<std::size_t>(out_h)), xs(static_cast<std::size_t>(out_w));
  for (std::int64_t i = 0; i < out_h; ++i) ys[static_cast<std::size_t>(i)] = i * h / out_h;
  for (std::int64_t i = 0; i < out_w; ++i) xs[static_cast<std::size_t>(i)] = i * w / out_w;
  for (std::int64_t p = 0; p < n * c; ++p) {
    const T* src = x.ptr() + p * h * w;
    T* dst = out.mutable_ptr() + p * out_h * out_w;
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      const T* srow = src + ys[static_cast<std::size_t>(oy)] * w;
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        dst[oy * out_w + ox] = srow[xs[static_cast<std::size_t>(ox)]];
      }
    }
  }
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([n, c, h, w, out_h, out_w, ys, xs, xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* g = grad_of(xi);
      for (std::int64_t p = 0; p < n * c; ++p) {
        T* dst = g + p * h * w;
        const T* src = oi->grad.data() + p * out_h * out_w;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
          T* drow = dst + ys[static_cast<std::size_t>(oy)] * w;
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            drow[xs[static_cast<std::size_t>(ox)]] += src[oy * out_w + ox];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, NormMode mode,
                      bool update_stats, const BatchNormState& state) {
  require_rank(x, 4, "batchnorm2d");
  const std::int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{
           &gamma, &beta, &running_mean, &running_var}) {
    if (!t->defined() || t->numel() != c) {
      throw DimensionError("batchnorm2d: per-channel tensors must hold " + std::to_string(c) +
                           " values");
    }
  }
  const std::int64_t count = n * plane;
  auto mean = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
  auto invstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
  const T* xp = x.ptr();
  if (mode == NormMode::train) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::int64_t b = 0; b < n; ++b) {
        const T* src = xp + (b * c + ch) * plane;
        for (std::int64_t p = 0; p < plane; ++p) s += src[p];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::int64_t b = 0; b < n; ++b) {
        const T* src = xp + (b * c + ch) * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
          const double d = src[p] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      (*mean)[static_cast<std::size_t>(ch)] = static_cast<T>(mu);
      (*invstd)[static_cast<std::size_t>(ch)] = static_cast<T>(1.0 / std::sqrt(var + state.eps));
      if (update_stats) {
        const double unbiased = count > 1 ? var * static_cast<double>(count) / (count - 1) : var;
        T& rm = running_mean.mutable_ptr()[ch];
        T& rv = running_var.mutable_ptr()[ch];
        rm = static_cast<T>((1.0 - state.momentum) * rm + state.momentum * mu);
        rv = static_cast<T>((1.0 - state.momentum) * rv + state.momentum * unbiased);
      }
    }
  } else {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      (*mean)[static_cast<std::size_t>(ch)] = running_mean.ptr()[ch];
      (*invstd)[static_cast<std::size_t>(ch)] =
          static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var.ptr()[ch]) + state.eps));
    }
  }
  Tensor<T> out(x.shape());
  T* op = out.mutable_ptr();
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const T mu = (*mean)[static_cast<std::size_t>(ch)];
      const T k = (*invstd)[static_cast<std::size_t>(ch)] * gamma.ptr()[ch];
      const T b0 = beta.ptr()[ch];
      const T* src = xp + (b * c + ch) * plane;
      T* dst = op + (b * c + ch) * plane;
      for (std::int64_t p = 0; p < plane; ++p) dst[p] = (src[p] - mu) * k + b0;
    }
  }
  check_finite(out, "batchnorm2d");
  if (tracking<T>({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    const bool train = mode == NormMode::train;
    record<T>([n, c, plane, count, train, mean, invstd, xi = x.impl(), gi = gamma.impl(),
               bi = beta.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      const T* go = oi->grad.data();
      const T* xd = xi->data.data();
      T* dx = xi->requires_grad ? grad_of(xi) : nullptr;
      T* dg = gi->requires_grad ? grad_of(gi) : nullptr;
      T* db = bi->requires_grad ? grad_of(bi) : nullptr;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const T mu = (*mean)[static_cast<std::size_t>(ch)];
        const T is = (*invstd)[static_cast<std::size_t>(ch)];
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::int64_t b = 0; b < n; ++b) {
          const T* g = go + (b * c + ch) * plane;
          const T* src = xd + (b * c + ch) * plane;
          for (std::int64_t p = 0; p < plane; ++p) {
            sum_dy += g[p];
            sum_dy_xhat += static_cast<double>(g[p]) * (src[p] - mu) * is;
          }
        }
        if (dg != nullptr) dg[ch] += static_cast<T>(sum_dy_xhat);
        if (db != nullptr) db[ch] += static_cast<T>(sum_dy);
        if (dx == nullptr) continue;
        const T gam = gi->data[static_cast<std::size_t>(ch)];
        if (!train) {
          for (std::int64_t b = 0; b < n; ++b) {
            const T* g = go + (b * c + ch) * plane;
            T* d = dx + (b * c + ch) * plane;
            for (std::int64_t p = 0; p < plane; ++p) d[p] += g[p] * gam * is;
          }
          continue;
        }
        const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(count));
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(count));
        for (std::int64_t b = 0; b < n; ++b) {
          const T* g = go + (b * c + ch) * plane;
          const T* src = xd + (b * c + ch) * plane;
          T* d = dx + (b * c + ch) * plane;
          for (std::int64_t p = 0; p < plane; ++p) {
            const T xhat = (src[p] - mu) * is;
            d[p] += gam * is * (g[p] - mean_dy - xhat * mean_dy_xhat);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "add", [](T x, T y) { return x + y; },
      [](T, T, T, T& da, T& db) {
        da = T(1);
        db = T(1);
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "sub", [](T x, T y) { return x - y; },
      [](T, T, T, T& da, T& db) {
        da = T(1);
        db = T(-1);
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "mul", [](T x, T y) { return x * y; },
      [](T x, T y, T, T& da, T& db) {
        da = y;
        db = x;
      });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "div", [](T x, T y) { return x / y; },
      [](T, T y, T out, T& da, T& db) {
        da = T(1) / y;
        db = -out / y;
      });
}

template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "minimum", [](T x, T y) { return x <= y ? x : y; },
      [](T x, T y, T, T& da, T& db) {
        da = x <= y ? T(1) : T(0);
        db = x <= y ? T(0) : T(1);
      });
}

template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "maximum", [](T x, T y) { return x >= y ? x : y; },
      [](T x, T y, T, T& da, T& db) {
        da = x >= y ? T(1) : T(0);
        db = x >= y ? T(0) : T(1);
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary_op(
      x, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary_op(
      x, "add_scalar", [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> atan(const Tensor<T>& x) {
  return unary_op(
      x, "atan", [](T v) { return std::atan(v); }, [](T v, T) { return T(1) / (T(1) + v * v); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary_op(
      x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  if (!x.defined()) throw ContractError("sum: undefined tensor");
  double acc = 0.0;
  for (const T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  check_finite(out, "sum");
  if (tracking<T>({&x})) {
    out.set_requires_grad(true);
    record<T>([xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* g = grad_of(xi);
      const T d = oi->grad[0];
      for (std::size_t i = 0; i < xi->data.size(); ++i) g[i] += d;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (!x.defined() || x.numel() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(x), static_cast<T>(1.0 / static_cast<double>(x.numel())));
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets,
                          const Tensor<T>& weights, double normalizer) {
  require_same_shape(logits, targets, "bce_with_logits");
  if (weights.defined()) require_same_shape(logits, weights, "bce_with_logits");
  if (!(normalizer > 0.0)) throw ContractError("bce_with_logits: normalizer must be positive");
  const auto n = logits.numel();
  const T* xp = logits.ptr();
  const T* tp = targets.ptr();
  const T* wp = weights.defined() ? weights.ptr() : nullptr;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = wp != nullptr ? wp[i] : 1.0;
    if (w == 0.0) continue;
    const double x = xp[i];
    const double l = std::max(x, 0.0) - x * tp[i] + std::log1p(std::exp(-std::abs(x)));
    acc += w * l;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / normalizer));
  check_finite(out, "bce_with_logits");
  if (tracking<T>({&logits})) {
    out.set_requires_grad(true);
    record<T>([normalizer, xi = logits.impl(), ti = targets.impl(),
               wi = weights.defined() ? weights.impl() : ImplPtr<T>{}, oi = out.impl()] {
      if (oi->grad.empty()) return;
      T* g = grad_of(xi);
      const double d = oi->grad[0] / normalizer;
      for (std::size_t i = 0; i < xi->data.size(); ++i) {
        const double w = wi ? wi->data[i] : 1.0;
        if (w == 0.0) continue;
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(xi->data[i])));
        g[i] += static_cast<T>(d * w * (s - ti->data[i]));
      }
    });
  }
  return out;
}

#define BYHD_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                \
                            const Conv2dOptions&);                                               \
  template Tensor<T> pool2d(const Tensor<T>&, const Pool2dOptions&);                             \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                 \
  template Tensor<T> slice(const Tensor<T>&, int, std::int64_t, std::int64_t);                   \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                    \
  template Tensor<T> expand(const Tensor<T>&, const Shape&);                                     \
  template Tensor<T> take(const Tensor<T>&, const std::vector<std::int64_t>&, const Shape&);     \
  template Tensor<T> resize_nearest(const Tensor<T>&, std::int64_t, std::int64_t);               \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                 Tensor<T>&, Tensor<T>&, NormMode, bool, const BatchNormState&); \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> minimum(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> maximum(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> atan(const Tensor<T>&);                                                     \
  template Tensor<T> square(const Tensor<T>&);                                                   \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> bce_with_logits(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                     double);

BYHD_INSTANTIATE_OPS(float)
BYHD_INSTANTIATE_OPS(double)

#undef BYHD_INSTANTIATE_OPS

}  // namespace byhd
