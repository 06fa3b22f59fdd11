#include "byhd/layers.hpp"

#include <cmath>

namespace byhd {

template <typename T>
BatchNorm<T>::BatchNorm(Builder<T> b, std::int64_t channels) {
  gamma = b.constant("weight", {channels}, 1.0);
  beta = b.constant("bias", {channels}, 0.0);
  running_mean = b.buffer("running_mean", {channels}, 0.0);
  running_var = b.buffer("running_var", {channels}, 1.0);
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, const Mode& mode) {
  return batchnorm2d(x, gamma, beta, running_mean, running_var, mode.norm, mode.update_stats);
}

template <typename T>
Conv<T>::Conv(Builder<T> b, const ConvShape& s, bool with_bias) : shape(s) {
  if (s.c_in < 1 || s.c_out < 1 || s.kernel_h < 1 || s.kernel_w < 1 || s.groups < 1 ||
      s.c_in % s.groups != 0 || s.c_out % s.groups != 0) {
    throw ConfigError("conv " + b.prefix() + ": invalid channel/group configuration " +
                      std::to_string(s.c_in) + "->" + std::to_string(s.c_out) + " groups " +
                      std::to_string(s.groups));
  }
  const int cg = s.c_in / s.groups;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cg * s.kernel_h * s.kernel_w));
  weight = b.uniform("weight", {s.c_out, cg, s.kernel_h, s.kernel_w}, bound);
  if (with_bias) bias = b.uniform("bias", {s.c_out}, bound);
}

template <typename T>
Tensor<T> Conv<T>::forward(const Tensor<T>& x) const {
  if (x.rank() == 4 && x.dim(1) != shape.c_in) {
    throw DimensionError("conv: expected " + std::to_string(shape.c_in) + " input channels, got " +
                         shape_str(x.shape()));
  }
  Conv2dOptions o{shape.stride, shape.stride, shape.kernel_h / 2, shape.kernel_w / 2,
                  shape.groups};
  return conv2d(x, weight, bias, o);
}

template <typename T>
ConvBnAct<T>::ConvBnAct(Builder<T> b, const ConvShape& s, Activation a)
    : conv(b.sub("conv"), s, false), bn(b.sub("bn"), s.c_out), act(a) {}

template <typename T>
Tensor<T> ConvBnAct<T>::forward(const Tensor<T>& x, const Mode& mode) {
  Tensor<T> y = bn.forward(conv.forward(x), mode);
  return act == Activation::identity ? y : activation(y, act);
}

template <typename T>
Bottleneck<T>::Bottleneck(Builder<T> b, int c_in, int c_out, bool shortcut, Activation act)
    : cv1(b.sub("cv1"), ConvShape::square(c_in, c_out, 1), act),
      cv2(b.sub("cv2"), ConvShape::square(c_out, c_out, 3), act),
      residual(shortcut && c_in == c_out) {}

template <typename T>
Tensor<T> Bottleneck<T>::forward(const Tensor<T>& x, const Mode& mode) {
  Tensor<T> y = cv2.forward(cv1.forward(x, mode), mode);
  return residual ? add(x, y) : y;
}

template <typename T>
C3<T>::C3(Builder<T> b, int c_in, int c_out, int depth, bool shortcut, Activation act) {
  const int hidden = c_out / 2;
  cv1 = ConvBnAct<T>(b.sub("cv1"), ConvShape::square(c_in, hidden, 1), act);
  cv2 = ConvBnAct<T>(b.sub("cv2"), ConvShape::square(c_in, hidden, 1), act);
  cv3 = ConvBnAct<T>(b.sub("cv3"), ConvShape::square(2 * hidden, c_out, 1), act);
  for (int i = 0; i < depth; ++i) {
    m.emplace_back(b.sub("m" + std::to_string(i)), hidden, hidden, shortcut, act);
  }
}

template <typename T>
Tensor<T> C3<T>::forward(const Tensor<T>& x, const Mode& mode) {
  Tensor<T> a = cv1.forward(x, mode);
  for (auto& block : m) a = block.forward(a, mode);
  Tensor<T> b = cv2.forward(x, mode);
  return cv3.forward(concat<T>({a, b}, 1), mode);
}

template struct BatchNorm<float>;
template struct BatchNorm<double>;
template struct Conv<float>;
template struct Conv<double>;
template struct ConvBnAct<float>;
template struct ConvBnAct<double>;
template struct Bottleneck<float>;
template struct Bottleneck<double>;
template struct C3<float>;
template struct C3<double>;

}  // namespace byhd
