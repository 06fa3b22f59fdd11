#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "byhd/param_store.hpp"
#include "byhd/tensor.hpp"

namespace byhd {

/// Central differences of a scalar function of a flat vector, one coordinate
/// at a time: (f(x + h e_i) - f(x - h e_i)) / 2h.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step);

/// Same over every parameter of a store. `f` reads the store; each
/// coordinate is restored bit-exactly after its two evaluations.
template <typename T>
std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& f,
                                                  ParamStore<T>& params, double step);

struct GradCheckOptions {
  double step = 1e-3;
  int max_coords = 48;           // sampled coordinates per input tensor
  std::uint64_t seed = 7;
  double floor = 1e-2;           // per-coordinate magnitude below which errors are absolute
  double kink_tol = 0.1;         // one-sided slope disagreement marking a kink
};

struct GradCheckReport {
  std::string name;
  double rel_error = 0.0;        // ||analytic - numeric|| / max(||analytic||, ||numeric||, floor)
  std::int64_t coords = 0;
  std::int64_t kinks = 0;        // coordinates skipped as non-differentiable points
  // Raw sums behind rel_error, for pooling reports.
  double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
};

/// Compares reverse-mode gradients against central differences.
///
/// `forward` builds an output from the named inputs; the checked scalar is
/// sum(output * R) for a fixed random projection R, accumulated in double on
/// the numeric side so untouched output elements cancel exactly. A scalar
/// output is used as is (R = 1).
template <typename T>
std::vector<GradCheckReport> check_gradients(
    const std::function<Tensor<T>()>& forward,
    const std::vector<std::pair<std::string, Tensor<T>>>& inputs,
    const GradCheckOptions& options = {});

/// Reverse-mode gradients of the float `forward` against central differences
/// of `reference`, the same computation in double. The float input values are
/// copied into `reference_inputs` first (same order and shapes), so the
/// numeric side differentiates exactly the function the float side evaluates.
std::vector<GradCheckReport> check_gradients_against(
    const std::function<Tensor<float>()>& forward,
    const std::vector<std::pair<std::string, Tensor<float>>>& inputs,
    const std::function<Tensor<double>()>& reference,
    const std::vector<std::pair<std::string, Tensor<double>>>& reference_inputs,
    const GradCheckOptions& options = {});

}  // namespace byhd
