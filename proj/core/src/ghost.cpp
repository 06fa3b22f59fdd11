#include "byhd/ghost.hpp"

#include <algorithm>
#include <string>

namespace byhd {

void DfcAttentionSpec::validate() const {
  if (strip_len_h < 1 || strip_len_w < 1 || strip_len_h % 2 == 0 || strip_len_w % 2 == 0) {
    throw ConfigError("dfc: strip lengths must be odd and >= 1");
  }
  if (downsample != 1 && downsample != 2) throw ConfigError("dfc: downsample must be 1 or 2");
}

GhostModuleSpec GhostModuleSpec::make(int c_in, int c_out, bool use_dfc) {
  GhostModuleSpec s;
  s.c_in = c_in;
  s.c_out = c_out;
  s.c_mid = c_out / 2;
  s.use_dfc = use_dfc;
  return s;
}

void GhostModuleSpec::validate() const {
  if (c_in < 1 || c_out < 1 || c_mid < 1) throw ConfigError("ghost: channel counts must be >= 1");
  if (c_out != 2 * c_mid) {
    throw ConfigError("ghost: c_out (" + std::to_string(c_out) + ") must equal 2*c_mid (" +
                      std::to_string(c_mid) + ")");
  }
  if (dw_kernel < 1 || dw_kernel % 2 == 0) throw ConfigError("ghost: dw_kernel must be odd");
  if (use_dfc) dfc.validate();
}

template <typename T>
DfcAttention<T>::DfcAttention(Builder<T> b, int c_in, int c_out, const DfcAttentionSpec& s)
    : spec(s) {
  spec.validate();
  reduce = ConvBnAct<T>(b.sub("reduce"), ConvShape::square(c_in, c_out, 1), Activation::identity);
  strip_h = ConvBnAct<T>(b.sub("strip_h"), {c_out, c_out, s.strip_len_h, 1, 1, c_out},
                         Activation::identity);
  strip_w = ConvBnAct<T>(b.sub("strip_w"), {c_out, c_out, 1, s.strip_len_w, 1, c_out},
                         Activation::identity);
}

template <typename T>
Tensor<T> DfcAttention<T>::forward(const Tensor<T>& x, const Mode& mode) {
  const auto h = x.dim(2);
  const auto w = x.dim(3);
  Tensor<T> z = x;
  if (spec.downsample > 1) {
    const int kh = static_cast<int>(std::min<std::int64_t>(spec.downsample, h));
    const int kw = static_cast<int>(std::min<std::int64_t>(spec.downsample, w));
    z = avg_pool2d(x, kh, kw, kh, kw);
  }
  z = reduce.forward(z, mode);
  z = strip_h.forward(z, mode);
  z = strip_w.forward(z, mode);
  Tensor<T> gate = sigmoid(z);
  if (gate.dim(2) != h || gate.dim(3) != w) gate = resize_nearest(gate, h, w);
  return gate;
}

template <typename T>
GhostModule<T>::GhostModule(Builder<T> b, const GhostModuleSpec& s) : spec(s) {
  spec.validate();
  primary = ConvBnAct<T>(b.sub("primary"), ConvShape::square(s.c_in, s.c_mid, 1), s.act);
  cheap = ConvBnAct<T>(b.sub("cheap"), ConvShape::square(s.c_mid, s.c_mid, s.dw_kernel, 1, s.c_mid),
                       Activation::identity);
  if (s.use_dfc) dfc = DfcAttention<T>(b.sub("dfc"), s.c_in, s.c_out, s.dfc);
}

template <typename T>
Tensor<T> GhostModule<T>::forward(const Tensor<T>& x, const Mode& mode) {
  if (x.rank() != 4 || x.dim(1) != spec.c_in) {
    throw DimensionError("ghost: expected " + std::to_string(spec.c_in) + " channels, got " +
                         shape_str(x.shape()));
  }
  Tensor<T> y1 = primary.forward(x, mode);
  Tensor<T> y2 = cheap.forward(y1, mode);
  Tensor<T> y = concat<T>({y1, y2}, 1);
  if (spec.use_dfc) y = mul(y, dfc.forward(x, mode));
  return y;
}

GhostModuleSpec GhostBottleneckSpec::spec1() const {
  GhostModuleSpec s = GhostModuleSpec::make(c_in, c_out / 2, use_dfc);
  s.dw_kernel = dw_kernel;
  s.dfc = dfc;
  s.act = act;
  return s;
}

GhostModuleSpec GhostBottleneckSpec::spec2() const {
  GhostModuleSpec s = GhostModuleSpec::make(c_out / 2, c_out, false);
  s.dw_kernel = dw_kernel;
  s.act = Activation::identity;
  return s;
}

void GhostBottleneckSpec::validate() const {
  if (stride != 1 && stride != 2) throw ConfigError("ghost bottleneck: stride must be 1 or 2");
  if (c_in < 1 || c_out < 4 || c_out % 4 != 0) {
    throw ConfigError("ghost bottleneck: c_out must be a positive multiple of 4, got " +
                      std::to_string(c_out));
  }
  spec1().validate();
  spec2().validate();
}

template <typename T>
GhostBottleneck<T>::GhostBottleneck(Builder<T> b, const GhostBottleneckSpec& s) : spec(s) {
  spec.validate();
  const int hidden = s.c_out / 2;
  ghost1 = GhostModule<T>(b.sub("ghost1"), s.spec1());
  if (s.stride == 2) {
    dw = ConvBnAct<T>(b.sub("dw"), ConvShape::square(hidden, hidden, s.dw_kernel, 2, hidden),
                      Activation::identity);
  }
  ghost2 = GhostModule<T>(b.sub("ghost2"), s.spec2());
  if (!s.identity_shortcut()) {
    short_dw = ConvBnAct<T>(b.sub("shortcut_dw"),
                            ConvShape::square(s.c_in, s.c_in, s.dw_kernel, s.stride, s.c_in),
                            Activation::identity);
    short_pw = ConvBnAct<T>(b.sub("shortcut_pw"), ConvShape::square(s.c_in, s.c_out, 1),
                            Activation::identity);
  }
}

template <typename T>
Tensor<T> GhostBottleneck<T>::forward(const Tensor<T>& x, const Mode& mode) {
  Tensor<T> y = ghost1.forward(x, mode);
  if (spec.stride == 2) y = dw.forward(y, mode);
  y = ghost2.forward(y, mode);
  if (spec.identity_shortcut()) return add(y, x);
  return add(y, short_pw.forward(short_dw.forward(x, mode), mode));
}

template <typename T>
GhostC3<T>::GhostC3(Builder<T> b, int c_in, int c_out, int depth, bool use_dfc, Activation act) {
  const int hidden = c_out / 2;
  cv1 = ConvBnAct<T>(b.sub("cv1"), ConvShape::square(c_in, hidden, 1), act);
  cv2 = ConvBnAct<T>(b.sub("cv2"), ConvShape::square(c_in, hidden, 1), act);
  cv3 = ConvBnAct<T>(b.sub("cv3"), ConvShape::square(2 * hidden, c_out, 1), act);
  for (int i = 0; i < depth; ++i) {
    GhostBottleneckSpec s;
    s.c_in = hidden;
    s.c_out = hidden;
    s.use_dfc = use_dfc;
    s.act = act;
    m.emplace_back(b.sub("m" + std::to_string(i)), s);
  }
}

template <typename T>
Tensor<T> GhostC3<T>::forward(const Tensor<T>& x, const Mode& mode) {
  Tensor<T> a = cv1.forward(x, mode);
  for (auto& block : m) a = block.forward(a, mode);
  Tensor<T> b = cv2.forward(x, mode);
  return cv3.forward(concat<T>({a, b}, 1), mode);
}

ParamCounts param_count_formula(std::int64_t c, std::int64_t c_prime, std::int64_t c_mid,
                                std::int64_t k) {
  if (c < 1 || c_prime < 1 || c_mid < 1 || k < 1) {
    throw ConfigError("param_count_formula: arguments must be >= 1");
  }
  ParamCounts p;
  p.p_conv = c * c_prime * k * k + 2 * c_prime;
  p.p_ghost = (c * c_mid * k * k + 2 * c_mid) * 2 + c_mid * c_prime * k * k + 2 * c_prime;
  return p;
}

template struct DfcAttention<float>;
template struct DfcAttention<double>;
template struct GhostModule<float>;
template struct GhostModule<double>;
template struct GhostBottleneck<float>;
template struct GhostBottleneck<double>;
template struct GhostC3<float>;
template struct GhostC3<double>;

}  // namespace byhd
