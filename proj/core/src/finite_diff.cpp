#include "byhd/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "byhd/ops.hpp"
#include "byhd/rng.hpp"

namespace byhd {

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step) {
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

template <typename T>
std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& f,
                                                  ParamStore<T>& params, double step) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, tensor] : params.params()) {
    Tensor<T> t = tensor;
    std::vector<double> g(static_cast<std::size_t>(t.numel()), 0.0);
    T* p = t.mutable_ptr();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T orig = p[i];
      p[i] = static_cast<T>(orig + step);
      const double hp = static_cast<double>(p[i]) - orig;
      const double fp = f();
      p[i] = static_cast<T>(orig - step);
      const double hm = orig - static_cast<double>(p[i]);
      const double fm = f();
      p[i] = orig;
      g[i] = (fp - fm) / (hp + hm);
    }
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

template <typename T>
double projected(const Tensor<T>& out, const std::vector<double>& r) {
  double acc = 0.0;
  const T* p = out.ptr();
  for (std::size_t i = 0; i < r.size(); ++i) acc += static_cast<double>(p[i]) * r[i];
  return acc;
}

std::vector<std::int64_t> sample_coords(std::int64_t n, int max_coords, Rng& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= max_coords) return idx;
  for (int i = 0; i < max_coords; ++i) {
    const auto j = rng.uniform_int(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(max_coords));
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <typename T>
std::vector<double> projection_for(const Tensor<T>& out, Rng& rng) {
  std::vector<double> r(static_cast<std::size_t>(out.numel()), 1.0);
  if (out.numel() > 1) {
    // Rounded through float so both precisions project with the same weights.
    for (auto& v : r) v = static_cast<float>(rng.normal());
  }
  return r;
}

template <typename T>
std::vector<std::vector<double>> analytic_grads(
    const std::function<Tensor<T>()>& forward,
    const std::vector<std::pair<std::string, Tensor<T>>>& inputs, Rng& rng,
    std::vector<double>& r) {
  for (auto [name, t] : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  Tape<T>::current().clear();
  Tensor<T> out = forward();
  r = projection_for(out, rng);
  std::vector<T> rt(r.begin(), r.end());
  Tensor<T> loss = sum(mul(out, Tensor<T>(out.shape(), rt)));
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : inputs) {
    std::vector<double> g(static_cast<std::size_t>(t.numel()), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), g.begin());
    analytic.push_back(std::move(g));
  }
  return analytic;
}

template <typename U>
std::vector<GradCheckReport> compare_numeric(
    const std::function<Tensor<U>()>& forward,
    const std::vector<std::pair<std::string, Tensor<U>>>& inputs, const std::vector<double>& r,
    const std::vector<std::vector<double>>& analytic, const GradCheckOptions& options,
    Rng& rng) {
  NoGradGuard no_grad;
  const double f0 = projected(forward(), r);
  std::vector<GradCheckReport> reports;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<U> t = inputs[k].second;
    GradCheckReport rep;
    rep.name = inputs[k].first;
    U* p = t.mutable_ptr();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (const auto i : sample_coords(t.numel(), options.max_coords, rng)) {
      const U orig = p[i];
      p[i] = static_cast<U>(orig + options.step);
      const double hp = static_cast<double>(p[i]) - orig;
      const double fp = projected(forward(), r);
      p[i] = static_cast<U>(orig - options.step);
      const double hm = orig - static_cast<double>(p[i]);
      const double fm = projected(forward(), r);
      p[i] = orig;
      const double sp = (fp - f0) / hp;
      const double sm = (f0 - fm) / hm;
      const double scale = std::max({std::abs(sp), std::abs(sm), options.floor});
      if (std::abs(sp - sm) > options.kink_tol * scale) {
        ++rep.kinks;
        continue;
      }
      const double numeric = (fp - fm) / (hp + hm);
      const double a = analytic[k][static_cast<std::size_t>(i)];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++rep.coords;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2),
                                   options.floor * std::sqrt(static_cast<double>(rep.coords))});
    rep.rel_error = rep.coords > 0 ? std::sqrt(diff2) / denom : 0.0;
    rep.diff_sq = diff2;
    rep.analytic_sq = a2;
    rep.numeric_sq = n2;
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace

template <typename T>
std::vector<GradCheckReport> check_gradients(
    const std::function<Tensor<T>()>& forward,
    const std::vector<std::pair<std::string, Tensor<T>>>& inputs,
    const GradCheckOptions& options) {
  Rng rng(options.seed);
  std::vector<double> r;
  const auto analytic = analytic_grads(forward, inputs, rng, r);
  return compare_numeric(forward, inputs, r, analytic, options, rng);
}

std::vector<GradCheckReport> check_gradients_against(
    const std::function<Tensor<float>()>& forward,
    const std::vector<std::pair<std::string, Tensor<float>>>& inputs,
    const std::function<Tensor<double>()>& reference,
    const std::vector<std::pair<std::string, Tensor<double>>>& reference_inputs,
    const GradCheckOptions& options) {
  if (inputs.size() != reference_inputs.size()) {
    throw ContractError("check_gradients_against: input lists differ in length");
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<float> a = inputs[k].second;
    Tensor<double> b = reference_inputs[k].second;
    if (a.shape() != b.shape()) {
      throw ContractError("check_gradients_against: shape mismatch for '" + inputs[k].first + "'");
    }
    const float* src = a.ptr();
    double* dst = b.mutable_ptr();
    for (std::int64_t i = 0; i < a.numel(); ++i) dst[i] = src[i];
  }
  Rng rng(options.seed);
  std::vector<double> r;
  const auto analytic = analytic_grads(forward, inputs, rng, r);
  return compare_numeric(reference, reference_inputs, r, analytic, options, rng);
}

template std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>&,
                                                           ParamStore<float>&, double);
template std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>&,
                                                           ParamStore<double>&, double);
template std::vector<GradCheckReport> check_gradients(
    const std::function<Tensor<float>()>&, const std::vector<std::pair<std::string, Tensor<float>>>&,
    const GradCheckOptions&);
template std::vector<GradCheckReport> check_gradients(
    const std::function<Tensor<double>()>&,
    const std::vector<std::pair<std::string, Tensor<double>>>&, const GradCheckOptions&);

}  // namespace byhd
