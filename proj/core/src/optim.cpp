#include "byhd/optim.hpp"

#include <cmath>
#include <string>

#include "byhd/ops.hpp"

namespace byhd {

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("sgd: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("sgd: weight_decay must be >= 0");
}

void GamConfig::validate() const {
  base.validate();
  if (!(rho > 0.0)) throw ConfigError("gam: rho must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("gam: alpha must be >= 0");
  if (!(xi > 0.0)) throw ConfigError("gam: xi must be > 0");
  if (!(fd_step > 0.0)) throw ConfigError("gam: fd_step must be > 0");
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

void apply_update(const SgdConfig& cfg, OptimizerState& state, std::vector<double>& theta,
                  const std::vector<double>& direction) {
  if (direction.size() != theta.size()) throw ContractError("sgd: direction size mismatch");
  if (state.momentum.size() != theta.size()) state.momentum.assign(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double d = direction[i];
    if (cfg.weight_decay != 0.0) d += cfg.weight_decay * theta[i];
    double& buf = state.momentum[i];
    buf = cfg.momentum != 0.0 ? cfg.momentum * buf + d : d;
    theta[i] -= cfg.lr * buf;
  }
  ++state.step;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  for (const double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double eval(const GradFn& fn, const std::vector<double>& theta, std::vector<double>& grad,
            std::int64_t* evals, const char* where) {
  grad.assign(theta.size(), 0.0);
  const double loss = fn(theta, grad);
  if (evals != nullptr) ++*evals;
  if (!std::isfinite(loss) || !all_finite(grad)) {
    throw NumericError(std::string("non-finite loss or gradient at ") + where);
  }
  return loss;
}

std::vector<double> offset(const std::vector<double>& theta, const std::vector<double>& dir,
                           double scale) {
  std::vector<double> out(theta);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * dir[i];
  return out;
}

double fd_eps(double fd_step, const std::vector<double>& theta) {
  return fd_step * (1.0 + l2_norm(theta));
}

/// Unit direction and its original norm; zero vector when |v| = 0.
std::pair<std::vector<double>, double> unit(const std::vector<double>& v) {
  const double n = l2_norm(v);
  std::vector<double> u(v.size(), 0.0);
  if (n > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) u[i] = v[i] / n;
  }
  return {u, n};
}

}  // namespace

std::vector<double> hvp(const GradFn& grad_fn, const std::vector<double>& theta,
                        const std::vector<double>& v, double fd_step, std::int64_t* evals) {
  if (v.size() != theta.size()) throw ContractError("hvp: direction size mismatch");
  const auto [u, norm] = unit(v);
  const double eps = fd_eps(fd_step, theta);
  std::vector<double> gp, gm;
  eval(grad_fn, offset(theta, u, eps), gp, evals, "hvp +eps");
  eval(grad_fn, offset(theta, u, -eps), gm, evals, "hvp -eps");
  std::vector<double> out(theta.size(), 0.0);
  if (norm == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) * norm / (2.0 * eps);
  return out;
}

GamStepInfo gam_step(const GamConfig& cfg, OptimizerState& state, std::vector<double>& theta,
                     const GradFn& grad_fn) {
  const std::size_t n = theta.size();
  GamStepInfo info;
  std::int64_t evals = 0;

  std::vector<double> g;
  info.loss = eval(grad_fn, theta, g, &evals, "theta");
  const double gn = l2_norm(g);
  info.grad_norm = gn;
  std::vector<double> dir(n);
  for (std::size_t i = 0; i < n; ++i) dir[i] = g[i] / (gn + cfg.xi);
  std::vector<double> f = hvp(grad_fn, theta, dir, cfg.fd_step, &evals);

  const double fnorm = l2_norm(f);
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = theta[i] + cfg.rho * f[i] / (fnorm + cfg.xi);

  std::vector<double> g_adv;
  eval(grad_fn, adv, g_adv, &evals, "theta_adv");
  const double gan = l2_norm(g_adv);
  info.adv_grad_norm = gan;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = g_adv[i] / (gan + cfg.xi);
  const auto [u, vnorm] = unit(v);
  const double eps = fd_eps(cfg.fd_step, adv);
  std::vector<double> g_fwd;
  eval(grad_fn, offset(adv, u, eps), g_fwd, &evals, "theta_adv +eps");
  std::vector<double> h_norm(n, 0.0);
  if (vnorm > 0.0) {
    for (std::size_t i = 0; i < n; ++i) h_norm[i] = cfg.rho * (g_fwd[i] - g_adv[i]) * vnorm / eps;
  }

  std::vector<double> direction;
  if (cfg.alpha == 0.0) {
    direction = g;
  } else {
    direction.resize(n);
    for (std::size_t i = 0; i < n; ++i) direction[i] = g[i] + cfg.alpha * h_norm[i];
  }
  apply_update(cfg.base, state, theta, direction);

  state.grad_evals += evals;
  state.h_loss = std::move(g);
  state.f = std::move(f);
  state.theta_adv = std::move(adv);
  state.h_norm = std::move(h_norm);
  return info;
}

FlatnessReport flatness_report(const GamConfig& cfg, const std::vector<double>& theta,
                               const GradFn& grad_fn, Rng& rng) {
  const std::size_t n = theta.size();
  std::vector<double> g;
  eval(grad_fn, theta, g, nullptr, "theta");
  const double gn = l2_norm(g);
  std::vector<double> dir(n);
  for (std::size_t i = 0; i < n; ++i) dir[i] = g[i] / (gn + cfg.xi);
  std::vector<double> f = hvp(grad_fn, theta, dir, cfg.fd_step);
  FlatnessReport rep;
  double fnorm = l2_norm(f);
  if (!(fnorm > cfg.xi)) {
    for (auto& x : f) x = rng.normal();
    fnorm = l2_norm(f);
    rep.fallback = true;
  }
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = theta[i] + cfg.rho * f[i] / fnorm;
  std::vector<double> g_adv;
  eval(grad_fn, adv, g_adv, nullptr, "theta_adv");
  rep.r1 = cfg.rho * l2_norm(g_adv);
  rep.lambda_max_est = rep.r1 / (cfg.rho * cfg.rho);
  return rep;
}

double schedule_factor(Schedule s, std::int64_t t, std::int64_t total) {
  if (s == Schedule::constant || total <= 1) return 1.0;
  const double p = std::min(1.0, static_cast<double>(t) / static_cast<double>(total - 1));
  return 0.5 * (1.0 + std::cos(M_PI * p));
}

// ---------------------------------------------------------------------------

template <typename T>
std::vector<double> flatten_values(const ParamStore<T>& store) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(store.count()));
  for (const auto& [name, t] : store.params()) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

template <typename T>
void assign_values(ParamStore<T>& store, const std::vector<double>& theta) {
  if (static_cast<std::int64_t>(theta.size()) != store.count()) {
    throw ContractError("assign_values: vector length does not match parameter count");
  }
  std::size_t k = 0;
  for (const auto& [name, tensor] : store.params()) {
    Tensor<T> t = tensor;
    for (auto& v : t.mutable_data()) v = static_cast<T>(theta[k++]);
  }
}

template <typename T>
std::vector<double> flatten_grads(const ParamStore<T>& store) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(store.count()));
  for (const auto& [name, t] : store.params()) {
    if (!t.has_grad()) throw ContractError("missing gradient for parameter '" + name + "'");
    out.insert(out.end(), t.grad().begin(), t.grad().end());
  }
  return out;
}

template <typename T>
void sgd_step(const SgdConfig& cfg, OptimizerState& state, ParamStore<T>& store) {
  const auto grads = flatten_grads(store);
  auto theta = flatten_values(store);
  apply_update(cfg, state, theta, grads);
  assign_values(store, theta);
  store.clear_grads();
}

template <typename T>
GradFn make_grad_fn(ParamStore<T>& store, const LossFn<T>& loss_fn) {
  return [&store, loss_fn](const std::vector<double>& theta, std::vector<double>& grad) {
    assign_values(store, theta);
    store.clear_grads();
    Tape<T>::current().clear();
    Tensor<T> loss = loss_fn();
    backward(loss);
    grad = flatten_grads(store);
    store.clear_grads();
    return static_cast<double>(loss.item());
  };
}

template <typename T>
GamStepInfo gam_step(const GamConfig& cfg, OptimizerState& state, ParamStore<T>& store,
                     const LossFn<T>& loss_fn) {
  auto theta = flatten_values(store);
  const auto entry = theta;
  try {
    const auto info = gam_step(cfg, state, theta, make_grad_fn(store, loss_fn));
    assign_values(store, theta);
    return info;
  } catch (...) {
    assign_values(store, entry);
    store.clear_grads();
    Tape<T>::current().clear();
    throw;
  }
}

template <typename T>
FlatnessReport flatness_report(const GamConfig& cfg, ParamStore<T>& store,
                               const LossFn<T>& loss_fn, Rng& rng) {
  const auto entry = flatten_values(store);
  try {
    const auto rep = flatness_report(cfg, entry, make_grad_fn(store, loss_fn), rng);
    assign_values(store, entry);
    return rep;
  } catch (...) {
    assign_values(store, entry);
    store.clear_grads();
    Tape<T>::current().clear();
    throw;
  }
}

#define BYHD_INSTANTIATE_OPTIM(T)                                                          \
  template std::vector<double> flatten_values(const ParamStore<T>&);                       \
  template void assign_values(ParamStore<T>&, const std::vector<double>&);                 \
  template std::vector<double> flatten_grads(const ParamStore<T>&);                        \
  template void sgd_step(const SgdConfig&, OptimizerState&, ParamStore<T>&);               \
  template GradFn make_grad_fn(ParamStore<T>&, const LossFn<T>&);                          \
  template GamStepInfo gam_step(const GamConfig&, OptimizerState&, ParamStore<T>&,         \
                                const LossFn<T>&);                                         \
  template FlatnessReport flatness_report(const GamConfig&, ParamStore<T>&, const LossFn<T>&, \
                                          Rng&);

BYHD_INSTANTIATE_OPTIM(float)
BYHD_INSTANTIATE_OPTIM(double)

#undef BYHD_INSTANTIATE_OPTIM

}  // namespace byhd
