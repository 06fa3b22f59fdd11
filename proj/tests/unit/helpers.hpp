#pragma once

#include <filesystem>
#include <string>

#include "byhd/rng.hpp"
#include "byhd/tensor.hpp"

namespace byhd::test {

template <typename T = float>
Tensor<T> randn(Rng& rng, const Shape& shape, double scale = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.mutable_data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

template <typename T = float>
Tensor<T> filled(const Shape& shape, std::vector<T> values) {
  return Tensor<T>(shape, std::move(values));
}

/// Fresh empty directory under the build tree.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(BYHD_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

template <typename T>
void zero_(Tensor<T> t) {
  for (auto& v : t.mutable_data()) v = T(0);
}

}  // namespace byhd::test
