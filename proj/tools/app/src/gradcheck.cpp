#include "byhd/app/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <ostream>

#include "byhd/attention.hpp"
#include "byhd/detector.hpp"
#include "byhd/finite_diff.hpp"
#include "byhd/ghost.hpp"
#include "byhd/loss.hpp"
#include "byhd/ops.hpp"

namespace byhd::app {

namespace {

template <typename T>
struct Case {
  std::function<Tensor<T>()> forward;
  std::vector<std::pair<std::string, Tensor<T>>> inputs;
  std::shared_ptr<void> keepalive;
  int max_coords = 48;
};

template <typename T>
Tensor<T> randn(Rng& rng, const Shape& shape, double scale = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.mutable_data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

template <typename T>
Tensor<T> rand_range(Rng& rng, const Shape& shape, double lo, double hi) {
  Tensor<T> t(shape);
  for (auto& v : t.mutable_data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Identity forward whose backward scales the incoming gradient, so the
/// reverse-mode result no longer matches finite differences.
template <typename T>
Tensor<T> corrupt_gradient(const Tensor<T>& x) {
  Tensor<T> out = x.clone();
  if (grad_enabled() && x.requires_grad()) {
    out.set_requires_grad(true);
    Tape<T>::current().record([xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) xi->grad[i] += T(1.25) * oi->grad[i];
    });
  }
  return out;
}

/// Every trainable tensor of a block plus its input.
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> with_params(const ParamStore<T>& store,
                                                           const Tensor<T>& x) {
  std::vector<std::pair<std::string, Tensor<T>>> in{{"x", x}};
  for (const auto& e : store.params()) in.push_back(e);
  return in;
}

// Batch statistics normalize but running buffers stay put across the many
// re-evaluations of a check.
const Mode kCheckMode{NormMode::train, false};

using Factory = std::function<void(Rng&, int, Case<float>*, Case<double>*)>;

struct Check {
  std::string name;
  Factory make;
};

#define BYHD_CASE(...)                                                    \
  [](Rng& rng, int i, Case<float>* cf, Case<double>* cd) {                \
    if (cf != nullptr) {                                                  \
      using T = float;                                                    \
      Case<T>& c = *cf;                                                   \
      __VA_ARGS__                                                         \
    } else {                                                              \
      using T = double;                                                   \
      Case<T>& c = *cd;                                                   \
      __VA_ARGS__                                                         \
    }                                                                     \
  }

template <typename T>
void unary_case(Rng& rng, int i, Case<T>& c, std::function<Tensor<T>(const Tensor<T>&)> f) {
  const Shape shapes[] = {{7}, {2, 3}, {2, 3, 4}, {1, 2, 3, 5}, {3, 1, 4, 2}, {4, 4}};
  auto x = randn<T>(rng, shapes[i % 6]);
  c.inputs = {{"x", x}};
  c.forward = [x, f] { return f(x); };
}

template <typename T>
void binary_case(Rng& rng, int i, Case<T>& c,
                 std::function<Tensor<T>(const Tensor<T>&, const Tensor<T>&)> f,
                 bool positive_b = false) {
  const Shape shapes[] = {{5}, {2, 3}, {2, 2, 3}, {1, 3, 2, 2}, {2, 1, 3, 3}, {6, 2}};
  auto a = randn<T>(rng, shapes[i % 6]);
  auto b = positive_b ? rand_range<T>(rng, shapes[i % 6], 0.5, 2.0) : randn<T>(rng, shapes[i % 6]);
  c.inputs = {{"a", a}, {"b", b}};
  c.forward = [a, b, f] { return f(a, b); };
}

std::vector<Check> primitive_checks() {
  std::vector<Check> v;
  v.push_back({"conv2d", BYHD_CASE({
                 struct G { int n, ci, co, h, w, k, s, p, g; };
                 const G gs[] = {{2, 3, 4, 5, 5, 3, 1, 1, 1}, {1, 4, 6, 6, 5, 3, 2, 1, 2},
                                 {2, 4, 4, 5, 6, 3, 1, 1, 4}, {1, 3, 5, 4, 4, 1, 1, 0, 1},
                                 {2, 2, 3, 7, 6, 5, 2, 2, 1}, {1, 6, 6, 5, 5, 1, 2, 0, 3}};
                 const G g = gs[i % 6];
                 auto x = randn<T>(rng, {g.n, g.ci, g.h, g.w});
                 auto w = randn<T>(rng, {g.co, g.ci / g.g, g.k, g.k}, 0.5);
                 auto b = randn<T>(rng, {g.co});
                 c.inputs = {{"x", x}, {"weight", w}, {"bias", b}};
                 c.forward = [=] { return conv2d(x, w, b, g.s, g.p, g.g); };
               })});
  v.push_back({"max_pool2d", BYHD_CASE({
                 const int ks[] = {2, 3, 5, 3, 2, 3};
                 const int ss[] = {2, 1, 1, 2, 1, 3};
                 const int k = ks[i % 6], s = ss[i % 6], p = k / 2;
                 auto x = randn<T>(rng, {2, 2, 6 + i % 3, 5 + i % 2});
                 c.inputs = {{"x", x}};
                 c.forward = [=] { return max_pool2d(x, k, s, p); };
               })});
  v.push_back({"avg_pool2d", BYHD_CASE({
                 const int kh[] = {2, 1, 6, 3, 2, 1};
                 const int kw[] = {2, 6, 1, 3, 3, 2};
                 auto x = randn<T>(rng, {2, 3, 6, 6});
                 const int a = kh[i % 6], b = kw[i % 6];
                 c.inputs = {{"x", x}};
                 c.forward = [=] { return avg_pool2d(x, a, b, a, b); };
               })});
  for (auto act : {Activation::sigmoid, Activation::relu, Activation::silu, Activation::hardswish}) {
    Check ch;
    ch.name = activation_name(act);
    ch.make = [act](Rng& rng, int i, Case<float>* cf, Case<double>* cd) {
      if (cf != nullptr) {
        unary_case<float>(rng, i, *cf, [act](const Tensor<float>& x) { return activation(x, act); });
      } else {
        unary_case<double>(rng, i, *cd,
                           [act](const Tensor<double>& x) { return activation(x, act); });
      }
    };
    v.push_back(ch);
  }
  v.push_back({"concat", BYHD_CASE({
                 const int axis = i % 4;
                 Shape sa{2, 3, 2, 2}, sb{2, 3, 2, 2};
                 sb[static_cast<std::size_t>(axis)] = 1 + i % 3;
                 auto a = randn<T>(rng, sa);
                 auto b = randn<T>(rng, sb);
                 c.inputs = {{"a", a}, {"b", b}};
                 c.forward = [=] { return concat(std::vector<Tensor<T>>{a, b, a}, axis); };
               })});
  v.push_back({"slice", BYHD_CASE({
                 const int axis = i % 3;
                 auto x = randn<T>(rng, {4, 5, 6});
                 const std::int64_t start = 1 + i % 2, len = 2;
                 c.inputs = {{"x", x}};
                 c.forward = [=] { return slice(x, axis, start, len); };
               })});
  v.push_back({"reshape", BYHD_CASE({
                 auto x = randn<T>(rng, {2, 3, 4});
                 const Shape to[] = {{24}, {6, 4}, {4, 3, 2}, {1, 24}, {2, 12}, {3, 8}};
                 const Shape s = to[i % 6];
                 c.inputs = {{"x", x}};
                 c.forward = [=] { return reshape(x, s); };
               })});
  v.push_back({"expand", BYHD_CASE({
                 const Shape from[] = {{2, 1, 3, 1}, {1, 3, 1, 4}, {2, 3, 1, 1},
                                       {1, 1, 2, 2}, {2, 1, 1, 3}, {1, 2, 1, 1}};
                 const Shape to[] = {{2, 4, 3, 2}, {2, 3, 3, 4}, {2, 3, 4, 5},
                                     {3, 2, 2, 2}, {2, 2, 3, 3}, {2, 2, 3, 3}};
                 auto x = randn<T>(rng, from[i % 6]);
                 const Shape s = to[i % 6];
                 c.inputs = {{"x", x}};
                 c.forward = [=] { return expand(x, s); };
               })});
  v.push_back({"take", BYHD_CASE({
                 auto x = randn<T>(rng, {3, 4, 2});
                 std::vector<std::int64_t> idx;
                 for (int k = 0; k < 10 + i; ++k) idx.push_back(rng.uniform_int(0, 23));
                 const Shape s{static_cast<std::int64_t>(idx.size())};
                 c.inputs = {{"x", x}};
                 c.forward = [=] { return take(x, idx, s); };
               })});
  v.push_back({"resize_nearest", BYHD_CASE({
                 auto x = randn<T>(rng, {1, 2, 2 + i % 3, 3});
                 const std::int64_t oh = 4 + i, ow = 6 + i % 2;
                 c.inputs = {{"x", x}};
                 c.forward = [=] { return resize_nearest(x, oh, ow); };
               })});
  for (const bool train : {true, false}) {
    Check ch;
    ch.name = train ? "batchnorm2d_train" : "batchnorm2d_eval";
    ch.make = [train](Rng& rng, int i, Case<float>* cf, Case<double>* cd) {
      auto build = [&](auto& c) {
        using T = typename std::remove_reference_t<decltype(c.inputs)>::value_type::second_type::value_type;
        const std::int64_t ch = 2 + i % 3;
        auto x = randn<T>(rng, {2 + i % 2, ch, 3, 2 + i % 3}, 1.5);
        auto gamma = rand_range<T>(rng, {ch}, 0.5, 1.5);
        auto beta = randn<T>(rng, {ch});
        auto rm = randn<T>(rng, {ch});
        auto rv = rand_range<T>(rng, {ch}, 0.5, 2.0);
        c.inputs = {{"x", x}, {"gamma", gamma}, {"beta", beta}};
        const NormMode mode = train ? NormMode::train : NormMode::eval;
        c.forward = [=]() mutable { return batchnorm2d(x, gamma, beta, rm, rv, mode, false); };
      };
      if (cf != nullptr) build(*cf); else build(*cd);
    };
    v.push_back(ch);
  }
  v.push_back({"add", BYHD_CASE({ binary_case<T>(rng, i, c, [](auto& a, auto& b) { return add(a, b); }); })});
  v.push_back({"sub", BYHD_CASE({ binary_case<T>(rng, i, c, [](auto& a, auto& b) { return sub(a, b); }); })});
  v.push_back({"mul", BYHD_CASE({ binary_case<T>(rng, i, c, [](auto& a, auto& b) { return mul(a, b); }); })});
  v.push_back({"div", BYHD_CASE({ binary_case<T>(rng, i, c, [](auto& a, auto& b) { return div(a, b); }, true); })});
  v.push_back({"minimum", BYHD_CASE({ binary_case<T>(rng, i, c, [](auto& a, auto& b) { return minimum(a, b); }); })});
  v.push_back({"maximum", BYHD_CASE({ binary_case<T>(rng, i, c, [](auto& a, auto& b) { return maximum(a, b); }); })});
  v.push_back({"scale", BYHD_CASE({ unary_case<T>(rng, i, c, [](auto& x) { return scale(x, T(-1.75)); }); })});
  v.push_back({"add_scalar", BYHD_CASE({ unary_case<T>(rng, i, c, [](auto& x) { return add_scalar(x, T(0.3)); }); })});
  v.push_back({"atan", BYHD_CASE({ unary_case<T>(rng, i, c, [](auto& x) { return atan(x); }); })});
  v.push_back({"square", BYHD_CASE({ unary_case<T>(rng, i, c, [](auto& x) { return square(x); }); })});
  v.push_back({"sum", BYHD_CASE({ unary_case<T>(rng, i, c, [](auto& x) { return sum(x); }); })});
  v.push_back({"mean", BYHD_CASE({ unary_case<T>(rng, i, c, [](auto& x) { return mean(x); }); })});
  v.push_back({"bce_with_logits", BYHD_CASE({
                 const Shape s{3 + i, 2};
                 auto x = randn<T>(rng, s, 2.0);
                 auto t = rand_range<T>(rng, s, 0.0, 1.0);
                 auto w = rand_range<T>(rng, s, 0.5, 2.0);
                 const bool weighted = i % 2 == 1;
                 c.inputs = {{"logits", x}};
                 c.forward = [=] { return bce_with_logits(x, t, weighted ? w : Tensor<T>(), 7.0); };
               })});
  return v;
}

template <typename T, typename Block, typename Spec>
void block_case(Rng& rng, Case<T>& c, const Shape& x_shape, const Spec& spec) {
  auto store = std::make_shared<ParamStore<T>>();
  Rng init = rng.fork(1);
  auto block = std::make_shared<Block>(Builder<T>(*store, init, "blk"), spec);
  auto x = randn<T>(rng, x_shape);
  c.inputs = with_params(*store, x);
  c.forward = [block, x] { return block->forward(x, kCheckMode); };
  c.keepalive = std::make_shared<std::pair<decltype(store), decltype(block)>>(store, block);
  c.max_coords = 12;
}

std::vector<Check> block_checks() {
  std::vector<Check> v;
  v.push_back({"ghost", BYHD_CASE({
                 const int ci[] = {4, 8, 6, 8, 4, 6};
                 const int co[] = {8, 8, 12, 16, 4, 8};
                 const int k[] = {3, 3, 5, 1, 3, 3};
                 auto spec = GhostModuleSpec::make(ci[i % 6], co[i % 6], false);
                 spec.dw_kernel = k[i % 6];
                 block_case<T, GhostModule<T>>(rng, c, {2, ci[i % 6], 5 + i % 3, 6}, spec);
               })});
  v.push_back({"dfc", BYHD_CASE({
                 DfcAttentionSpec spec;
                 const int lh[] = {5, 3, 5, 7, 1, 3};
                 const int lw[] = {5, 5, 3, 7, 3, 1};
                 const int ds[] = {2, 1, 2, 1, 2, 2};
                 spec.strip_len_h = lh[i % 6];
                 spec.strip_len_w = lw[i % 6];
                 spec.downsample = ds[i % 6];
                 const int ci = 3 + i % 3, co = 4 + 2 * (i % 2);
                 auto store = std::make_shared<ParamStore<T>>();
                 Rng init = rng.fork(1);
                 auto block = std::make_shared<DfcAttention<T>>(Builder<T>(*store, init, "dfc"), ci, co, spec);
                 auto x = randn<T>(rng, {2, ci, 6 + i % 2, 4 + 2 * (i % 3)});
                 c.inputs = with_params(*store, x);
                 c.forward = [block, x] { return block->forward(x, kCheckMode); };
                 c.keepalive = std::make_shared<std::pair<decltype(store), decltype(block)>>(store, block);
                 c.max_coords = 12;
               })});
  v.push_back({"ca", BYHD_CASE({
                 CoordAttnSpec spec;
                 const int ch[] = {8, 16, 12, 32, 8, 24};
                 spec.channels = ch[i % 6];
                 spec.reduction = 4 + 4 * (i % 2);
                 spec.min_hidden = 4;
                 block_case<T, CoordAttention<T>>(rng, c, {2, spec.channels, 3 + i % 3, 4 + i % 2}, spec);
               })});
  v.push_back({"scconv", BYHD_CASE({
                 ScConvSpec spec;
                 const int ch[] = {4, 8, 6, 8, 4, 12};
                 const int r[] = {4, 2, 2, 4, 3, 2};
                 spec.channels = ch[i % 6];
                 spec.pool_ratio = r[i % 6];
                 spec.kernel = i % 3 == 2 ? 1 : 3;
                 block_case<T, ScConv<T>>(rng, c, {2, spec.channels, 8, 8 - 4 * (i % 2)}, spec);
               })});
  v.push_back({"sppf_sc", BYHD_CASE({
                 SppfScSpec spec;
                 const int ci[] = {8, 16, 8, 12, 16, 8};
                 spec.c_in = ci[i % 6];
                 spec.c_out = 8 + 4 * (i % 2);
                 spec.pool_kernel = i % 3 == 1 ? 3 : 5;
                 spec.use_sc = i % 4 != 3;
                 spec.sc.pool_ratio = 2;
                 block_case<T, SppfSc<T>>(rng, c, {2, spec.c_in, 4, 4 + 2 * (i % 2)}, spec);
               })});
  v.push_back({"bottleneck", BYHD_CASE({
                 GhostBottleneckSpec spec;
                 const int ci[] = {8, 8, 16, 4, 8, 12};
                 const int co[] = {8, 16, 16, 8, 12, 12};
                 const int st[] = {1, 2, 1, 2, 1, 2};
                 spec.c_in = ci[i % 6];
                 spec.c_out = co[i % 6];
                 spec.stride = st[i % 6];
                 spec.use_dfc = i % 3 != 2;
                 spec.dfc.downsample = 1 + i % 2;
                 block_case<T, GhostBottleneck<T>>(rng, c, {2, spec.c_in, 6, 4 + 2 * (i % 2)}, spec);
               })});
  v.push_back({"head", BYHD_CASE({
                 // Three 1x1 prediction convs on random features, scored by the
                 // full detection loss with its detached targets frozen.
                 ModelSpec spec;
                 spec.input_size = 64;
                 spec.num_classes = 1 + i % 3;
                 const int no = kAnchorsPerLevel * spec.outputs_per_anchor();
                 auto store = std::make_shared<ParamStore<T>>();
                 Rng init = rng.fork(1);
                 Builder<T> b(*store, init, "head");
                 const std::int64_t n = 2;
                 std::vector<Tensor<T>> feats;
                 std::vector<std::shared_ptr<Conv<T>>> convs;
                 std::vector<std::pair<std::string, Tensor<T>>> inputs;
                 for (int l = 0; l < kNumLevels; ++l) {
                   const int ch = 4 + 2 * l;
                   const std::int64_t g = spec.input_size / kStrides[static_cast<std::size_t>(l)];
                   feats.push_back(randn<T>(rng, {n, ch, g, g}));
                   inputs.emplace_back("feature" + std::to_string(l), feats.back());
                   convs.push_back(std::make_shared<Conv<T>>(
                       b.sub("p" + std::to_string(l + 3)), ConvShape::square(ch, no, 1), true));
                 }
                 for (const auto& e : store->params()) inputs.push_back(e);
                 std::vector<GroundTruth> targets;
                 const int count = 2 + i;
                 for (int k = 0; k < count; ++k) {
                   const double w = rng.uniform(6, 40), h = rng.uniform(6, 40);
                   const double cx = rng.uniform(w / 2, 64 - w / 2), cy = rng.uniform(h / 2, 64 - h / 2);
                   targets.push_back({BBox::from_center(cx, cy, w, h),
                                      static_cast<int>(rng.uniform_int(0, spec.num_classes - 1)),
                                      rng.uniform_int(0, n - 1)});
                 }
                 auto constants = std::make_shared<LossConstants>();
                 c.inputs = inputs;
                 c.forward = [=] {
                   std::vector<Tensor<T>> heads;
                   for (int l = 0; l < kNumLevels; ++l) {
                     heads.push_back(convs[static_cast<std::size_t>(l)]->forward(
                         feats[static_cast<std::size_t>(l)]));
                   }
                   return detection_loss(heads, targets, spec, LossConfig{}, constants.get()).total;
                 };
                 c.keepalive = std::make_shared<std::pair<decltype(store), decltype(convs)>>(store, convs);
                 c.max_coords = 16;
               })});
  return v;
}

std::vector<Check> model_checks() {
  std::vector<Check> v;
  for (const Variant variant : {Variant::ghost, Variant::conv}) {
    Check ch;
    ch.name = std::string("model_") + variant_name(variant);
    ch.make = [variant](Rng& rng, int i, Case<float>* cf, Case<double>* cd) {
      auto build = [&](auto& c) {
        using T = typename std::remove_reference_t<decltype(c.inputs)>::value_type::second_type::value_type;
        ModelSpec spec;
        spec.variant = variant;
        spec.input_size = 64;
        spec.width_multiple = 0.125;
        spec.use_ca = i % 2 == 0;
        spec.use_sc = i % 3 != 1;
        auto model = std::make_shared<Detector<T>>(spec, 100 + static_cast<std::uint64_t>(i));
        auto x = rand_range<T>(rng, {2, 3, 64, 64}, 0.0, 1.0);
        std::vector<GroundTruth> targets;
        for (int k = 0; k < 3; ++k) {
          const double w = rng.uniform(6, 30), h = rng.uniform(6, 30);
          targets.push_back({BBox::from_center(rng.uniform(w / 2, 64 - w / 2),
                                               rng.uniform(h / 2, 64 - h / 2), w, h),
                             static_cast<int>(rng.uniform_int(0, 1)), k % 2});
        }
        auto constants = std::make_shared<LossConstants>();
        c.inputs = model->params().params();
        c.forward = [=] {
          const auto heads = model->forward(x, kCheckMode);
          return detection_loss(heads, targets, spec, LossConfig{}, constants.get()).total;
        };
        c.keepalive = model;
        c.max_coords = 2;
      };
      if (cf != nullptr) build(*cf); else build(*cd);
    };
    v.push_back(ch);
  }
  return v;
}

#undef BYHD_CASE

std::vector<Check> checks_for(GradScope scope) {
  switch (scope) {
    case GradScope::primitives: return primitive_checks();
    case GradScope::blocks: return block_checks();
    case GradScope::model: return model_checks();
  }
  return {};
}

template <typename T>
GradcheckResult run_one(const Check& check, const GradcheckOptions& o, bool inject) {
  constexpr bool fp64 = std::is_same_v<T, double>;
  GradcheckResult r;
  r.name = check.name;
  r.dtype = fp64 ? "f64" : "f32";
  r.tolerance = gradcheck_tolerance(fp64);
  const int cases = o.scope == GradScope::model ? std::min(o.cases, 2) : o.cases;
  for (int i = 0; i < cases; ++i) {
    const std::uint64_t case_seed =
        mix_seed(o.seed, mix_seed(std::hash<std::string>{}(check.name), static_cast<std::uint64_t>(i)));
    Rng rng(case_seed);
    Case<T> c;
    if constexpr (fp64) {
      check.make(rng, i, nullptr, &c);
    } else {
      check.make(rng, i, &c, nullptr);
    }
    GradCheckOptions gopt;
    // Whole models pack many max-pool and clamp switch points close together.
    gopt.step = o.scope == GradScope::model ? 1e-6 : 1e-5;
    gopt.max_coords = c.max_coords;
    gopt.seed = mix_seed(o.seed, static_cast<std::uint64_t>(i));
    std::function<Tensor<T>()> fwd = c.forward;
    if (inject) {
      fwd = [inner = c.forward] { return corrupt_gradient(inner()); };
    }
    std::vector<GradCheckReport> reports;
    if constexpr (fp64) {
      reports = check_gradients<T>(fwd, c.inputs, gopt);
    } else {
      // Float rounding in the forward pass swamps float finite differences,
      // so the numeric side runs the identical case in double.
      Rng twin_rng(case_seed);
      Case<double> twin;
      check.make(twin_rng, i, nullptr, &twin);
      reports = check_gradients_against(fwd, c.inputs, twin.forward, twin.inputs, gopt);
    }
    if (o.scope == GradScope::model) {
      // One norm-wise error over every sampled parameter coordinate.
      GradCheckReport pooled;
      pooled.name = "all parameters";
      for (const auto& rep : reports) {
        pooled.kinks += rep.kinks;
        pooled.coords += rep.coords;
        pooled.diff_sq += rep.diff_sq;
        pooled.analytic_sq += rep.analytic_sq;
        pooled.numeric_sq += rep.numeric_sq;
      }
      const double denom =
          std::max({std::sqrt(pooled.analytic_sq), std::sqrt(pooled.numeric_sq),
                    gopt.floor * std::sqrt(static_cast<double>(pooled.coords))});
      pooled.rel_error = pooled.coords > 0 ? std::sqrt(pooled.diff_sq) / denom : 0.0;
      reports = {pooled};
    }
    for (const auto& rep : reports) {
      r.kinks += rep.kinks;
      if (rep.rel_error >= r.worst) {
        r.worst = rep.rel_error;
        r.worst_input = rep.name;
      }
    }
    ++r.cases;
  }
  return r;
}

}  // namespace

double gradcheck_tolerance(bool fp64) { return fp64 ? 1e-6 : 1e-3; }

std::vector<std::string> gradcheck_names(GradScope scope) {
  std::vector<std::string> names;
  for (const auto& c : checks_for(scope)) names.push_back(c.name);
  return names;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& o) {
  std::vector<GradcheckResult> out;
  for (const auto& check : checks_for(o.scope)) {
    if (!o.only.empty() && check.name != o.only) continue;
    const bool inject = check.name == o.fault;
    out.push_back(run_one<float>(check, o, inject));
    out.push_back(run_one<double>(check, o, inject));
  }
  return out;
}

bool print_gradcheck(const std::vector<GradcheckResult>& results, std::ostream& out,
                     std::ostream& err) {
  bool ok = true;
  for (const auto& r : results) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-20s %s  worst=%.3e (%s) tol=%.0e cases=%d kinks=%lld  %s\n",
                  r.name.c_str(), r.dtype.c_str(), r.worst, r.worst_input.c_str(), r.tolerance,
                  r.cases, static_cast<long long>(r.kinks), r.pass() ? "PASS" : "FAIL");
    out << buf;
    if (!r.pass()) {
      ok = false;
      std::snprintf(buf, sizeof buf, "gradient check failed: %s (%s) relative error %.3e > %.0e\n",
                    r.name.c_str(), r.dtype.c_str(), r.worst, r.tolerance);
      err << buf;
    }
  }
  return ok;
}

}  // namespace byhd::app
