#include "byhd/app/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include "byhd/app/trainer.hpp"
#include "byhd/data.hpp"
#include "byhd/error.hpp"
#include "byhd/loss.hpp"
#include "byhd/metrics.hpp"
#include "byhd/optim.hpp"

namespace fs = std::filesystem;

namespace byhd::app {

int exit_status_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const CorruptionError*>(&e)) {
    return kExitUsage;
  }
  return kExitRuntime;
}

namespace {

template <typename F>
int guarded(std::ostream& err, const char* command, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "byhd " << command << ": " << e.what() << "\n";
    return exit_status_for(e);
  }
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

RunConfig config_from(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "train", [&] {
    RunConfig cfg = config_from(args.config, args.overrides);
    if (!args.data.empty()) cfg.data = args.data;
    if (!args.out.empty()) cfg.out = args.out;
    if (args.has_seed) cfg.seed = args.seed;
    cfg.model_spec();  // single-conv is not trainable
    const TrainSummary s = train(cfg, out);
    out << "final map50=" << fixed(s.final_map50) << " best map50=" << fixed(s.best_map50)
        << " steps=" << s.steps << "\n";
    return int{kExitOk};
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "eval", [&] {
    if (args.ckpt.empty()) throw ConfigError("--ckpt is required");
    if (args.data.empty()) throw ConfigError("--data is required");
    LoadedModel loaded = load_checkpoint(args.ckpt);
    const auto samples = load_samples(loaded.config, args.data);
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const EvalOutput ev = evaluate(*loaded.model, samples, all, args.conf, args.iou);
    out << "images=" << samples.size() << " detections=" << ev.detections.size() << "\n";
    out << "precision=" << fixed(ev.summary.precision) << " recall=" << fixed(ev.summary.recall)
        << " map50=" << fixed(ev.summary.map50) << "\n";
    for (const auto& [cls, ap] : ev.summary.ap) {
      out << "class " << cls << " ap50=" << (ap ? fixed(*ap) : std::string("n/a")) << "\n";
      if (!args.curves_dir.empty() && ap) {
        std::error_code ec;
        fs::create_directories(args.curves_dir, ec);
        const std::string name = "class" + std::to_string(cls);
        write_curves(args.curves_dir, name, confidence_curve(ev.detections, ev.truth, cls));
      }
    }
    return int{kExitOk};
  });
}

ParamReport param_report(const RunConfig& cfg) {
  ParamReport r;
  if (cfg.variant == "single-conv") {
    ParamStore<float> store;
    Rng rng(cfg.seed);
    Builder<float> b(store, rng, "conv");
    const int k = static_cast<int>(cfg.probe_kernel);
    ConvBnAct<float> conv(b, ConvShape::square(static_cast<int>(cfg.probe_c_in),
                                               static_cast<int>(cfg.probe_c_out), k),
                          Activation::silu);
    r.modules.emplace_back("conv", store.count());
    r.total = store.count();
    NoGradGuard no_grad;
    FlopCounter counter;
    conv.forward(Tensor<float>({1, cfg.probe_c_in, cfg.input_size, cfg.input_size}, 0.0f),
                 Mode::eval());
    r.flops = counter.flops();
    return r;
  }
  const ModelSpec spec = cfg.model_spec();
  Detector<float> model(spec, cfg.seed);
  for (const auto& m : model.modules()) {
    r.modules.emplace_back(m, model.params().count(m + "."));
  }
  r.total = model.params().count();
  r.flops = count_flops(spec, {1, 3, cfg.input_size, cfg.input_size});
  return r;
}

int cmd_params(const ParamsArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "params", [&] {
    const RunConfig cfg = config_from(args.config, args.overrides);
    const ParamReport r = param_report(cfg);
    out << "variant=" << cfg.variant << " input=" << cfg.input_size << "\n";
    for (const auto& [name, n] : r.modules) out << "  " << name << " " << n << "\n";
    out << "total params=" << r.total << " flops=" << r.flops << "\n";
    if (args.compare) {
      if (cfg.variant == "single-conv") throw ConfigError("--compare needs variant ghost or conv");
      RunConfig other = cfg;
      other.variant = cfg.variant == "ghost" ? "conv" : "ghost";
      const ParamReport o = param_report(other);
      const ParamReport& ghost = cfg.variant == "ghost" ? r : o;
      const ParamReport& conv = cfg.variant == "ghost" ? o : r;
      const double dp = 100.0 * (1.0 - static_cast<double>(ghost.total) / conv.total);
      const double df = 100.0 * (1.0 - static_cast<double>(ghost.flops) / conv.flops);
      out << "baseline params=" << conv.total << " flops=" << conv.flops << "\n";
      out << "ghost params=" << ghost.total << " flops=" << ghost.flops << "\n";
      out << "reduction params=" << fixed(dp, 1) << "% flops=" << fixed(df, 1) << "%\n";
    }
    return int{kExitOk};
  });
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, "gradcheck", [&] {
    const auto results = run_gradcheck(options);
    return print_gradcheck(results, out, err) ? int{kExitOk} : int{kExitCheckFailed};
  });
}

namespace {

void print_flatness(const FlatnessReport& rep, std::ostream& out) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "r1=%.9g lambda_max_est=%.9g", rep.r1, rep.lambda_max_est);
  out << buf << (rep.fallback ? " (random direction)" : "") << "\n";
}

}  // namespace

int cmd_flatness(const FlatnessArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "flatness", [&] {
    if (!(args.rho > 0)) throw ConfigError("--rho must be > 0");
    GamConfig gam;
    gam.rho = args.rho;
    Rng rng(args.seed);
    if (!args.fixture.empty()) {
      GradFn fn;
      if (args.fixture == "quadratic") {
        // 0.5 a theta^2 with a = 4, at its minimum.
        fn = [](const std::vector<double>& th, std::vector<double>& g) {
          g = {4.0 * th[0]};
          return 2.0 * th[0] * th[0];
        };
      } else if (args.fixture == "constant") {
        fn = [](const std::vector<double>&, std::vector<double>& g) {
          g = {0.0};
          return 1.0;
        };
      } else {
        throw ConfigError("unknown fixture '" + args.fixture + "' (quadratic|constant)");
      }
      print_flatness(flatness_report(gam, std::vector<double>{0.0}, fn, rng), out);
      return int{kExitOk};
    }
    if (args.ckpt.empty()) throw ConfigError("--ckpt or --fixture is required");
    if (args.data.empty()) throw ConfigError("--data is required");
    LoadedModel loaded = load_checkpoint(args.ckpt);
    const auto samples = load_samples(loaded.config, args.data);
    auto order = batch_order(samples.size(), args.seed, 0);
    order.resize(std::min(order.size(), static_cast<std::size_t>(std::max<std::int64_t>(1, args.batch))));
    const Batch batch = make_batch(samples, order);
    Detector<float>& model = *loaded.model;
    const LossFn<float> loss_fn = [&] {
      const auto heads = model.forward(batch.images, Mode::eval());
      return detection_loss(heads, batch.targets, model.spec(), LossConfig{}).total;
    };
    print_flatness(flatness_report(gam, model.params(), loss_fn, rng), out);
    return int{kExitOk};
  });
}

int cmd_gen_synth(const GenSynthArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "gen-synth", [&] {
    if (args.out.empty()) throw ConfigError("--out is required");
    SynthOptions o;
    o.count = args.count;
    o.size = args.size;
    o.seed = args.seed;
    const auto labels = gen_synth(args.out, o);
    std::size_t objects = 0;
    for (const auto& l : labels) objects += l.size();
    out << "wrote " << labels.size() << " images (" << objects << " objects) to " << args.out
        << "\n";
    return int{kExitOk};
  });
}

}  // namespace byhd::app
