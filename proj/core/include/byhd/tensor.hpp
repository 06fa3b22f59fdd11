#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "byhd/error.hpp"

namespace byhd {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() {
  return DType::f32;
}
template <>
constexpr DType dtype_of<double>() {
  return DType::f64;
}

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }
};

/// Dense row-major tensor handle. Copies share storage; use clone() for a
/// deep copy. Feature maps use the batch x channels x height x width layout.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : impl_(std::make_shared<TensorImpl<T>>()) {
    const auto n = shape_numel(shape);
    impl_->shape = std::move(shape);
    impl_->data.assign(static_cast<std::size_t>(n), fill);
    impl_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : impl_(std::make_shared<TensorImpl<T>>()) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
      throw DimensionError("tensor: shape " + shape_str(shape) + " does not hold " +
                           std::to_string(values.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
    impl_->requires_grad = requires_grad;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1}, value, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  /// Extent along `axis`; negative axes count from the back.
  std::int64_t dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) {
      throw DimensionError("tensor: axis out of range for shape " + shape_str(shape()));
    }
    return impl_->shape[static_cast<std::size_t>(axis)];
  }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }
  const T* ptr() const { return impl_->data.data(); }
  T* mutable_ptr() { return impl_->data.data(); }

  T item() const {
    if (numel() != 1) throw ContractError("tensor: item() on " + shape_str(shape()));
    return impl_->data[0];
  }

  T at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void clear_grad() {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }

  /// Deep copy of data, no gradient, not tracked.
  Tensor clone() const {
    Tensor out;
    out.impl_ = std::make_shared<TensorImpl<T>>();
    out.impl_->shape = impl_->shape;
    out.impl_->data = impl_->data;
    return out;
  }

  /// Deep copy that keeps `requires_grad = false`; breaks the tape link.
  Tensor detach() const { return clone(); }

  const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

template <typename T>
T Tensor<T>::at(std::initializer_list<std::int64_t> index) const {
  if (static_cast<int>(index.size()) != rank()) {
    throw DimensionError("tensor: index rank mismatch for shape " + shape_str(shape()));
  }
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    const auto extent = impl_->shape[axis++];
    if (i < 0 || i >= extent) throw DimensionError("tensor: index out of range");
    flat = flat * extent + i;
  }
  return impl_->data[static_cast<std::size_t>(flat)];
}

// ---------------------------------------------------------------------------
// Reverse-mode tape.

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Per-thread, per-scalar-type list of backward closures in forward order.
///
/// backward() replays the closures in reverse, which is a valid topological
/// order because every op is recorded after its inputs exist. The tape is
/// cleared by backward(); calling backward() again before any new op is
/// recorded is a StateError.
template <typename T>
class Tape {
 public:
  static Tape& current() {
    thread_local Tape tape;
    return tape;
  }

  void record(std::function<void()> entry) {
    entries_.push_back(std::move(entry));
    consumed_ = false;
  }

  std::size_t size() const { return entries_.size(); }

  void clear() {
    entries_.clear();
    entries_.shrink_to_fit();
  }

  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw ContractError("backward: loss must be a single scalar");
    }
    if (consumed_ && entries_.empty()) {
      throw StateError("backward: tape already consumed; run a new forward pass first");
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward: loss does not depend on any tensor requiring grad");
    }
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += T(1);
    // Entries may release storage as they run; move them out first so a
    // throwing entry still leaves the tape consumed.
    auto entries = std::move(entries_);
    entries_.clear();
    consumed_ = true;
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
      (*it)();
      *it = nullptr;
    }
  }

 private:
  std::vector<std::function<void()>> entries_;
  bool consumed_ = false;
};

template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>::current().backward(loss);
}

}  // namespace byhd
