#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "byhd/tensor.hpp"

namespace byhd {

/// Ordered collection of named tensors. Trainable parameters and
/// non-trainable buffers (norm running statistics) live in separate lists;
/// both iterate in insertion order.
template <typename T>
class ParamStore {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  /// Registers a trainable parameter (requires_grad is forced on).
  Tensor<T> add(const std::string& name, Tensor<T> value) {
    claim(name);
    value.set_requires_grad(true);
    index_[name] = {false, params_.size()};
    params_.emplace_back(name, value);
    return value;
  }

  Tensor<T> add_buffer(const std::string& name, Tensor<T> value) {
    claim(name);
    value.set_requires_grad(false);
    index_[name] = {true, buffers_.size()};
    buffers_.emplace_back(name, value);
    return value;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  /// Parameter or buffer by name.
  Tensor<T> get(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("param store: no tensor named '" + name + "'");
    return it->second.first ? buffers_[it->second.second].second
                            : params_[it->second.second].second;
  }

  const std::vector<Entry>& params() const { return params_; }
  const std::vector<Entry>& buffers() const { return buffers_; }

  /// Scalar count of trainable parameters whose name starts with `prefix`.
  std::int64_t count(const std::string& prefix = "") const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) {
      if (name.compare(0, prefix.size(), prefix) == 0) n += t.numel();
    }
    return n;
  }

  void clear_grads() {
    for (auto& [name, t] : params_) t.clear_grad();
  }

 private:
  void claim(const std::string& name) {
    if (name.empty()) throw ContractError("param store: empty name");
    if (contains(name)) throw ContractError("param store: duplicate name '" + name + "'");
  }

  std::vector<Entry> params_;
  std::vector<Entry> buffers_;
  std::unordered_map<std::string, std::pair<bool, std::size_t>> index_;
};

template <typename T>
std::int64_t count_parameters(const ParamStore<T>& store, const std::string& prefix = "") {
  return store.count(prefix);
}

}  // namespace byhd
