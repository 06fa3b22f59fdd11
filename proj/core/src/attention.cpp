#include "byhd/attention.hpp"

#include <algorithm>
#include <string>

namespace byhd {

int CoordAttnSpec::hidden() const { return std::max(min_hidden, channels / reduction); }

void CoordAttnSpec::validate() const {
  if (channels < 1 || reduction < 1 || min_hidden < 1) {
    throw ConfigError("coord attention: channels, reduction and min_hidden must be >= 1");
  }
}

template <typename T>
CoordEmbedding<T> ca_embed(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("ca_embed: expected 4-D input, got " + shape_str(x.shape()));
  const int h = static_cast<int>(x.dim(2));
  const int w = static_cast<int>(x.dim(3));
  return {avg_pool2d(x, 1, w, 1, w), avg_pool2d(x, h, 1, h, 1)};
}

template <typename T>
CoordAttention<T>::CoordAttention(Builder<T> b, const CoordAttnSpec& s) : spec(s) {
  spec.validate();
  const int mip = s.hidden();
  f1 = Conv<T>(b.sub("f1"), ConvShape::square(s.channels, mip, 1), true);
  bn = BatchNorm<T>(b.sub("bn"), mip);
  f_h = Conv<T>(b.sub("f_h"), ConvShape::square(mip, s.channels, 1), true);
  f_w = Conv<T>(b.sub("f_w"), ConvShape::square(mip, s.channels, 1), true);
  for (Tensor<T>* bias : {&f1.bias, &f_h.bias, &f_w.bias}) {
    std::fill(bias->mutable_data().begin(), bias->mutable_data().end(), T(0));
  }
}

template <typename T>
Tensor<T> CoordAttention<T>::forward(const Tensor<T>& x, const Mode& mode) {
  if (x.rank() != 4 || x.dim(1) != spec.channels) {
    throw DimensionError("coord attention: expected " + std::to_string(spec.channels) +
                         " channels, got " + shape_str(x.shape()));
  }
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto emb = ca_embed(x);
  Tensor<T> z = concat<T>({reshape(emb.z_h, {n, c, 1, h}), emb.z_w}, 3);
  Tensor<T> f = activation(bn.forward(f1.forward(z), mode), spec.act);
  const auto mip = f.dim(1);
  Tensor<T> fh = reshape(slice(f, 3, 0, h), {n, mip, h, 1});
  Tensor<T> fw = slice(f, 3, h, w);
  Tensor<T> gh = expand(sigmoid(f_h.forward(fh)), x.shape());
  Tensor<T> gw = expand(sigmoid(f_w.forward(fw)), x.shape());
  return mul(mul(x, gh), gw);
}

void ScConvSpec::validate() const {
  if (channels < 2 || channels % 2 != 0) {
    throw ConfigError("scconv: channel count must be even, got " + std::to_string(channels));
  }
  if (pool_ratio < 2) throw ConfigError("scconv: pool_ratio must be >= 2");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("scconv: kernel must be odd");
}

template <typename T>
ScConv<T>::ScConv(Builder<T> b, const ScConvSpec& s) : spec(s) {
  spec.validate();
  const int half = s.channels / 2;
  const auto shape = ConvShape::square(half, half, s.kernel);
  k1 = ConvBnAct<T>(b.sub("k1"), shape, Activation::identity);
  k2 = ConvBnAct<T>(b.sub("k2"), shape, Activation::identity);
  k3 = ConvBnAct<T>(b.sub("k3"), shape, Activation::identity);
  k4 = ConvBnAct<T>(b.sub("k4"), shape, Activation::identity);
}

template <typename T>
Tensor<T> ScConv<T>::forward(const Tensor<T>& x, const Mode& mode) {
  if (x.rank() != 4 || x.dim(1) != spec.channels) {
    throw DimensionError("scconv: expected " + std::to_string(spec.channels) + " channels, got " +
                         shape_str(x.shape()));
  }
  const auto half = x.dim(1) / 2;
  const auto h = x.dim(2), w = x.dim(3);
  Tensor<T> xa = slice(x, 1, 0, half);
  Tensor<T> xb = slice(x, 1, half, half);
  Tensor<T> out_a = k1.forward(xa, mode);
  const int ph = static_cast<int>(std::min<std::int64_t>(spec.pool_ratio, h));
  const int pw = static_cast<int>(std::min<std::int64_t>(spec.pool_ratio, w));
  Tensor<T> cal = k2.forward(avg_pool2d(xb, ph, pw, ph, pw), mode);
  if (cal.dim(2) != h || cal.dim(3) != w) cal = resize_nearest(cal, h, w);
  Tensor<T> gate = sigmoid(add(xb, cal));
  Tensor<T> out_b = k4.forward(k3.forward(mul(xb, gate), mode), mode);
  return concat<T>({out_a, out_b}, 1);
}

void SppfScSpec::validate() const {
  if (c_in < 2 || c_out < 1) throw ConfigError("sppf: invalid channel counts");
  if (pool_kernel < 1 || pool_kernel % 2 == 0) throw ConfigError("sppf: pool_kernel must be odd");
  if (use_sc) {
    ScConvSpec s = sc;
    s.channels = hidden();
    s.validate();
  }
}

template <typename T>
SppfSc<T>::SppfSc(Builder<T> b, const SppfScSpec& s, Activation act) : spec(s) {
  spec.validate();
  spec.sc.channels = s.hidden();
  cv1 = ConvBnAct<T>(b.sub("cv1"), ConvShape::square(s.c_in, s.hidden(), 1), act);
  if (s.use_sc) sc = ScConv<T>(b.sub("sc"), spec.sc);
  cv2 = ConvBnAct<T>(b.sub("cv2"), ConvShape::square(4 * s.hidden(), s.c_out, 1), act);
}

template <typename T>
Tensor<T> SppfSc<T>::forward(const Tensor<T>& x, const Mode& mode) {
  if (x.rank() != 4 || x.dim(1) != spec.c_in) {
    throw DimensionError("sppf: expected " + std::to_string(spec.c_in) + " channels, got " +
                         shape_str(x.shape()));
  }
  Tensor<T> y0 = cv1.forward(x, mode);
  if (spec.use_sc) y0 = sc.forward(y0, mode);
  const int k = spec.pool_kernel;
  Tensor<T> y1 = max_pool2d(y0, k, 1, k / 2);
  Tensor<T> y2 = max_pool2d(y1, k, 1, k / 2);
  Tensor<T> y3 = max_pool2d(y2, k, 1, k / 2);
  return cv2.forward(concat<T>({y0, y1, y2, y3}, 1), mode);
}

template CoordEmbedding<float> ca_embed(const Tensor<float>&);
template CoordEmbedding<double> ca_embed(const Tensor<double>&);
template struct CoordAttention<float>;
template struct CoordAttention<double>;
template struct ScConv<float>;
template struct ScConv<double>;
template struct SppfSc<float>;
template struct SppfSc<double>;

}  // namespace byhd
