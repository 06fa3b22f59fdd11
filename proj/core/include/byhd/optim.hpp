#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "byhd/param_store.hpp"
#include "byhd/rng.hpp"

namespace byhd {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;

  void validate() const;
};

struct GamConfig {
  SgdConfig base;
  double rho = 0.1;
  double alpha = 0.5;
  double xi = 1e-12;
  double fd_step = 1e-3;  // HVP step is fd_step * (1 + ||theta||)
  int batch_size = 1;     // informational; the loss function owns the batch

  void validate() const;
};

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<double> momentum;
  // Scratch vectors of the last GAM step.
  std::vector<double> h_loss, f, theta_adv, h_norm;
  std::int64_t grad_evals = 0;  // cumulative gradient evaluations
};

/// Loss and gradient at theta. Every call counts as one gradient evaluation.
using GradFn = std::function<double(const std::vector<double>& theta, std::vector<double>& grad)>;

double l2_norm(const std::vector<double>& v);

/// theta <- theta - lr * buf with buf = momentum * buf + (direction + wd * theta).
void apply_update(const SgdConfig& cfg, OptimizerState& state, std::vector<double>& theta,
                  const std::vector<double>& direction);

/// Central difference of gradients along v:
///   (grad(theta + eps v/|v|) - grad(theta - eps v/|v|)) * |v| / (2 eps),
/// eps = fd_step * (1 + |theta|). theta is left untouched. v = 0 gives 0
/// (both evaluations still run so the cost is fixed at two).
std::vector<double> hvp(const GradFn& grad_fn, const std::vector<double>& theta,
                        const std::vector<double>& v, double fd_step,
                        std::int64_t* evals = nullptr);

struct GamStepInfo {
  double loss = 0;        // loss at theta_t
  double grad_norm = 0;   // |h_loss|
  double adv_grad_norm = 0;
};

/// One gradient-norm-aware step, exactly five gradient evaluations:
///   h_loss = grad(theta)                                        (1)
///   f      = H(theta) g/(|g| + xi)        central difference      (2)
///   theta_adv = theta + rho f/(|f| + xi)
///   g_adv  = grad(theta_adv)                                    (1)
///   h_norm = rho H(theta_adv) g_adv/(|g_adv| + xi)  forward diff (1, reuses g_adv)
///   theta <- theta - lr (h_loss + alpha h_norm)    via apply_update
/// With alpha == 0 the direction is h_loss itself. A non-finite loss or
/// gradient at the perturbed points restores theta and throws NumericError.
GamStepInfo gam_step(const GamConfig& cfg, OptimizerState& state, std::vector<double>& theta,
                     const GradFn& grad_fn);

struct FlatnessReport {
  double r1 = 0;              // rho * |grad(theta_adv)|
  double lambda_max_est = 0;  // r1 / rho^2
  bool fallback = false;      // ascent direction was degenerate, random unit used
};

/// Gradient-norm flatness at theta along the ascent direction of gam_step.
/// When the Hessian-gradient product vanishes (|f| <= xi), a seeded random
/// unit direction replaces it. theta is not modified.
FlatnessReport flatness_report(const GamConfig& cfg, const std::vector<double>& theta,
                               const GradFn& grad_fn, Rng& rng);

// ---------------------------------------------------------------------------
// ParamStore adapters. Parameters are flattened in store order.

template <typename T>
std::vector<double> flatten_values(const ParamStore<T>& store);

template <typename T>
void assign_values(ParamStore<T>& store, const std::vector<double>& theta);

/// Throws ContractError naming the first parameter without a gradient.
template <typename T>
std::vector<double> flatten_grads(const ParamStore<T>& store);

/// Consumes populated grads, updates, clears grads, increments the step.
template <typename T>
void sgd_step(const SgdConfig& cfg, OptimizerState& state, ParamStore<T>& store);

/// `loss_fn` runs a forward pass on the fixed batch and returns the scalar
/// loss; the adapter runs backward and reads the grads.
template <typename T>
using LossFn = std::function<Tensor<T>()>;

template <typename T>
GradFn make_grad_fn(ParamStore<T>& store, const LossFn<T>& loss_fn);

template <typename T>
GamStepInfo gam_step(const GamConfig& cfg, OptimizerState& state, ParamStore<T>& store,
                     const LossFn<T>& loss_fn);

template <typename T>
FlatnessReport flatness_report(const GamConfig& cfg, ParamStore<T>& store,
                               const LossFn<T>& loss_fn, Rng& rng);

enum class Schedule { constant, cosine };

/// Multiplier in [0, 1] for step t of total (cosine decays to 0).
double schedule_factor(Schedule s, std::int64_t t, std::int64_t total);

}  // namespace byhd
