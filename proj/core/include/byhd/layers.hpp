#pragma once

#include <string>
#include <vector>

#include "byhd/ops.hpp"
#include "byhd/param_store.hpp"
#include "byhd/rng.hpp"

namespace byhd {

/// How norm layers behave during one forward pass.
struct Mode {
  NormMode norm = NormMode::train;
  bool update_stats = true;

  static Mode train() { return {NormMode::train, true}; }
  static Mode eval() { return {NormMode::eval, false}; }
};

/// Registers parameters under a dotted prefix with seeded initialization:
/// conv weights and biases uniform in +-1/sqrt(fan_in), norm scale 1, shift 0.
template <typename T>
class Builder {
 public:
  Builder(ParamStore<T>& store, Rng& rng, std::string prefix = "")
      : store_(&store), rng_(&rng), prefix_(std::move(prefix)) {}

  Builder sub(const std::string& name) const {
    return Builder(*store_, *rng_, prefix_.empty() ? name : prefix_ + "." + name);
  }

  std::string name(const std::string& leaf) const {
    return prefix_.empty() ? leaf : prefix_ + "." + leaf;
  }

  Tensor<T> uniform(const std::string& leaf, Shape shape, double bound) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.mutable_data()) v = static_cast<T>(rng_->uniform(-bound, bound));
    return store_->add(name(leaf), t);
  }

  Tensor<T> constant(const std::string& leaf, Shape shape, double value) {
    return store_->add(name(leaf), Tensor<T>(std::move(shape), static_cast<T>(value)));
  }

  Tensor<T> buffer(const std::string& leaf, Shape shape, double value) {
    return store_->add_buffer(name(leaf), Tensor<T>(std::move(shape), static_cast<T>(value)));
  }

  const std::string& prefix() const { return prefix_; }
  ParamStore<T>& store() const { return *store_; }
  Rng& rng() const { return *rng_; }

 private:
  ParamStore<T>* store_;
  Rng* rng_;
  std::string prefix_;
};

template <typename T>
struct BatchNorm {
  Tensor<T> gamma, beta, running_mean, running_var;

  BatchNorm() = default;
  BatchNorm(Builder<T> b, std::int64_t channels);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

struct ConvShape {
  int c_in = 1;
  int c_out = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int groups = 1;

  static ConvShape square(int c_in, int c_out, int k, int stride = 1, int groups = 1) {
    return {c_in, c_out, k, k, stride, groups};
  }
};

/// Plain convolution with "same" padding (k/2 per axis).
template <typename T>
struct Conv {
  ConvShape shape;
  Tensor<T> weight, bias;

  Conv() = default;
  Conv(Builder<T> b, const ConvShape& s, bool with_bias);
  Tensor<T> forward(const Tensor<T>& x) const;
};

/// conv -> batch norm -> activation; the conv carries no bias.
template <typename T>
struct ConvBnAct {
  Conv<T> conv;
  BatchNorm<T> bn;
  Activation act = Activation::silu;

  ConvBnAct() = default;
  ConvBnAct(Builder<T> b, const ConvShape& s, Activation act);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

/// 1x1 reduce then 3x3, optional residual when channels match.
template <typename T>
struct Bottleneck {
  ConvBnAct<T> cv1, cv2;
  bool residual = false;

  Bottleneck() = default;
  Bottleneck(Builder<T> b, int c_in, int c_out, bool shortcut, Activation act);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

/// Cross-stage-partial block: two 1x1 branches at half width, bottlenecks on
/// one of them, 1x1 fuse of the concatenation.
template <typename T>
struct C3 {
  ConvBnAct<T> cv1, cv2, cv3;
  std::vector<Bottleneck<T>> m;

  C3() = default;
  C3(Builder<T> b, int c_in, int c_out, int depth, bool shortcut, Activation act);
  Tensor<T> forward(const Tensor<T>& x, const Mode& mode);
};

}  // namespace byhd
