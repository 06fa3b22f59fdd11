#include <benchmark/benchmark.h>

#include "byhd/data.hpp"
#include "byhd/detector.hpp"
#include "byhd/loss.hpp"
#include "byhd/optim.hpp"

using namespace byhd;

namespace {

Tensor<float> random_tensor(Shape shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = state.range(0);
  Rng rng(0);
  const auto x = random_tensor({8, c, 32, 32}, rng);
  const auto w = random_tensor({c, c, 3, 3}, rng);
  const auto b = random_tensor({c}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1, 1));
  state.counters["flops"] = benchmark::Counter(static_cast<double>(2 * 9 * c * c * 8 * 32 * 32),
                                                benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = state.range(0);
  Rng rng(1);
  auto x = random_tensor({8, c, 32, 32}, rng);
  auto w = random_tensor({c, c, 3, 3}, rng);
  auto b = random_tensor({c}, rng);
  for (auto* t : {&x, &w, &b}) t->set_requires_grad(true);
  for (auto _ : state) {
    backward(sum(conv2d(x, w, b, 1, 1, 1)));
    for (auto* t : {&x, &w, &b}) t->clear_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

struct Step {
  ModelSpec spec;
  Detector<float> model;
  Batch batch;
  Step() : spec(make_spec()), model(spec, 0) {
    SynthOptions o;
    o.count = 8;
    o.size = spec.input_size;
    std::vector<Sample> samples;
    for (std::int64_t i = 0; i < o.count; ++i) samples.push_back(render_synth(o, i));
    batch = make_batch(samples);
  }
  static ModelSpec make_spec() {
    ModelSpec s;
    s.input_size = 64;
    s.width_multiple = 0.25;
    return s;
  }
  LossFn<float> loss() {
    return [this] {
      return detection_loss(model.forward(batch.images, Mode::train()), batch.targets, spec,
                            LossConfig{})
          .total;
    };
  }
};

void BM_SgdStep(benchmark::State& state) {
  Step s;
  SgdConfig cfg;
  cfg.lr = 1e-4;
  OptimizerState st;
  for (auto _ : state) {
    backward(s.loss()());
    sgd_step(cfg, st, s.model.params());
  }
}
BENCHMARK(BM_SgdStep)->Unit(benchmark::kMillisecond);

void BM_GamStep(benchmark::State& state) {
  Step s;
  GamConfig cfg;
  cfg.base.lr = 1e-4;
  OptimizerState st;
  for (auto _ : state) gam_step(cfg, st, s.model.params(), s.loss());
}
BENCHMARK(BM_GamStep)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
