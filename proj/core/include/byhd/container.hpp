#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "byhd/param_store.hpp"
#include "byhd/tensor.hpp"

namespace byhd {

/// Binary tensor container shared by checkpoints and dataset images.
///
/// Layout (little-endian):
///   "BYHD" | u32 version (1) | u32 meta_len | meta_len bytes of UTF-8
///   "key=value\n" lines | u32 tensor_count | per tensor: u32 name_len,
///   name, u8 dtype (1 = f32, 2 = f64), u32 rank, rank x u64 extents, raw
///   payload.
struct ContainerTensor {
  std::string name;
  DType dtype = DType::f32;
  Shape shape;
  std::vector<std::uint8_t> payload;
};

class Container {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void set_meta(const std::string& key, const std::string& value);
  /// Empty string when absent.
  std::string meta(const std::string& key) const;
  bool has_meta(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& metadata() const { return meta_; }

  template <typename T>
  void add(const std::string& name, const Tensor<T>& t);

  bool contains(const std::string& name) const;
  const ContainerTensor& entry(const std::string& name) const;
  const std::vector<ContainerTensor>& tensors() const { return tensors_; }

  /// Throws FormatError if the stored dtype differs from T.
  template <typename T>
  Tensor<T> get(const std::string& name) const;

  std::vector<std::uint8_t> serialize() const;
  static Container parse(const std::vector<std::uint8_t>& bytes);

  /// Writes to a sibling temp file and renames over `path`.
  void save(const std::string& path) const;
  static Container load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<ContainerTensor> tensors_;
};

/// Parameters and buffers of a store plus metadata, one tensor per name.
template <typename T>
void checkpoint_save(const std::string& path, const ParamStore<T>& store,
                     const std::vector<std::pair<std::string, std::string>>& meta);

/// Copies every tensor of `store` from the file by name. Missing names or
/// shape mismatches throw ContractError.
template <typename T>
void checkpoint_restore(const Container& ckpt, ParamStore<T>& store);

}  // namespace byhd
