#include "byhd/app/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "byhd/container.hpp"
#include "byhd/error.hpp"
#include "byhd/loss.hpp"
#include "byhd/optim.hpp"

namespace fs = std::filesystem;

namespace byhd::app {

std::string format_epoch(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "epoch=%lld loss=%.6f box=%.6f obj=%.6f cls=%.6f precision=%.6f recall=%.6f "
                "map50=%.6f",
                static_cast<long long>(r.epoch), r.loss, r.box, r.obj, r.cls, r.precision,
                r.recall, r.map50);
  return buf;
}

EvalOutput evaluate(Detector<float>& model, const std::vector<Sample>& samples,
                    const std::vector<std::size_t>& indices, double conf_thresh, double nms_iou,
                    std::int64_t batch_size) {
  NoGradGuard no_grad;
  EvalOutput out;
  const auto& spec = model.spec();
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
    const std::vector<std::size_t> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                         indices.begin() + static_cast<std::ptrdiff_t>(end));
    const Batch batch = make_batch(samples, chunk);
    const auto heads = model.forward(batch.images, Mode::eval());
    const auto per_image = decode_nms(heads, spec, conf_thresh, nms_iou);
    for (std::size_t k = 0; k < per_image.size(); ++k) {
      for (Detection d : per_image[k]) {
        d.image_id = static_cast<std::int64_t>(start + k);
        out.detections.push_back(d);
      }
    }
    for (GroundTruth g : batch.targets) {
      g.image_id += static_cast<std::int64_t>(start);
      out.truth.push_back(g);
    }
  }
  out.summary = map50(out.detections, out.truth, spec.num_classes);
  return out;
}

std::vector<Sample> load_samples(const RunConfig& cfg, const std::string& data_dir) {
  auto samples = load_dataset(data_dir, cfg.num_classes);
  const auto size = samples.front().image.dim(1);
  if (size != cfg.input_size) {
    throw ConfigError("dataset images are " + std::to_string(size) + "x" + std::to_string(size) +
                      " but input_size = " + std::to_string(cfg.input_size));
  }
  return samples;
}

std::vector<std::pair<std::string, std::string>> checkpoint_metadata(const RunConfig& cfg,
                                                                     std::int64_t step,
                                                                     std::int64_t epoch,
                                                                     double map50) {
  std::vector<std::pair<std::string, std::string>> meta{{"format", "byhd-checkpoint"},
                                                        {"step", std::to_string(step)},
                                                        {"epoch", std::to_string(epoch)}};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", map50);
  meta.emplace_back("map50", buf);
  std::istringstream is(config_to_text(cfg));
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    // Paths describe where a run happened, not what it is.
    if (key == "data" || key == "out") continue;
    meta.emplace_back("cfg." + key, line.substr(eq + 3));
  }
  return meta;
}

LoadedModel load_checkpoint(const std::string& path) {
  const Container ckpt = Container::load(path);
  if (ckpt.meta("format") != "byhd-checkpoint") {
    throw ConfigError(path + " is a tensor container but not a checkpoint");
  }
  LoadedModel out;
  for (const auto& [k, v] : ckpt.metadata()) {
    if (k.rfind("cfg.", 0) == 0) set_config_value(out.config, k.substr(4), v);
  }
  out.config.validate();
  out.model = std::make_unique<Detector<float>>(out.config.model_spec(), out.config.seed);
  try {
    checkpoint_restore(ckpt, out.model->params());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("incompatible checkpoint: ") + e.what());
  }
  out.step = std::atoll(ckpt.meta("step").c_str());
  return out;
}

namespace {

struct StepLoss {
  double total = 0, box = 0, obj = 0, cls = 0;
};

StepLoss read_parts(const LossParts<float>& p) {
  return {p.total.item(), p.box.item(), p.obj.item(), p.cls.item()};
}

}  // namespace

TrainSummary train(const RunConfig& cfg, const std::vector<Sample>& samples,
                   const std::string& out_dir, std::ostream& log) {
  cfg.validate();
  const ModelSpec spec = cfg.model_spec();
  if (samples.empty()) throw ConfigError("train: empty dataset");
  if (samples.front().image.dim(1) != cfg.input_size) {
    throw ConfigError("train: dataset image size does not match input_size");
  }
  const Split split = split_indices(samples.size(), cfg.split, cfg.seed);
  if (split.train.empty() || split.val.empty()) {
    throw ConfigError("train: split leaves an empty train or validation set");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

  const auto t_start = std::chrono::steady_clock::now();
  Detector<float> model(spec, cfg.seed);
  auto& store = model.params();
  OptimizerState state;
  const LossConfig loss_cfg;
  const AugmentOptions aug{cfg.augment, 0.5, 0.1};

  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const auto n_train = split.train.size();
  const auto steps_per_epoch = static_cast<std::int64_t>((n_train + bs - 1) / bs);
  std::int64_t total_steps = cfg.epochs * steps_per_epoch;
  if (cfg.max_steps > 0) total_steps = std::min(total_steps, cfg.max_steps);

  log << "effective configuration:\n" << config_to_text(cfg);
  log << "train=" << n_train << " val=" << split.val.size() << " params=" << store.count()
      << " steps=" << total_steps << "\n";

  std::ofstream metrics((fs::path(out_dir) / "metrics.log").string(), std::ios::trunc);
  if (!metrics) throw IoError("cannot write metrics.log under " + out_dir);
  const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();
  const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();

  TrainSummary summary;
  summary.best_map50 = -1.0;
  std::int64_t step = 0;
  for (std::int64_t epoch = 0; epoch < cfg.epochs && step < total_steps; ++epoch) {
    const auto order = batch_order(n_train, cfg.seed, epoch);
    StepLoss acc;
    std::int64_t epoch_steps = 0;
    for (std::size_t start = 0; start < n_train && step < total_steps; start += bs) {
      std::vector<Sample> chosen;
      for (std::size_t k = start; k < std::min(n_train, start + bs); ++k) {
        const auto idx = split.train[order[k]];
        Rng rng(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1), idx));
        chosen.push_back(augment(samples[idx], aug, rng));
      }
      const Batch batch = make_batch(chosen);
      double factor = schedule_factor(cfg.schedule, step, total_steps);
      if (step < cfg.warmup_steps) {
        factor *= static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps + 1);
      }
      StepLoss sl;
      try {
        if (cfg.optimizer == OptimizerKind::sgd) {
          SgdConfig sgd = cfg.sgd_config();
          sgd.lr *= factor;
          Tape<float>::current().clear();
          const auto heads = model.forward(batch.images, Mode::train());
          const auto parts = detection_loss(heads, batch.targets, spec, loss_cfg);
          sl = read_parts(parts);
          if (!std::isfinite(sl.total)) throw NumericError("loss is not finite");
          backward(parts.total);
          sgd_step(sgd, state, store);
        } else {
          GamConfig gam = cfg.gam_config();
          gam.base.lr *= factor;
          gam.rho *= factor;
          int calls = 0;
          const LossFn<float> loss_fn = [&]() {
            const Mode mode = calls == 0 ? Mode::train() : Mode{NormMode::train, false};
            const auto heads = model.forward(batch.images, mode);
            auto parts = detection_loss(heads, batch.targets, spec, loss_cfg);
            if (calls == 0) sl = read_parts(parts);
            ++calls;
            return parts.total;
          };
          gam_step(gam, state, store, loss_fn);
        }
      } catch (const NumericError& e) {
        throw NumericError("non-finite value at step " + std::to_string(step + 1) + ": " +
                           e.what());
      }
      acc.total += sl.total;
      acc.box += sl.box;
      acc.obj += sl.obj;
      acc.cls += sl.cls;
      ++epoch_steps;
      ++step;
    }

    const EvalOutput ev = evaluate(model, samples, split.val, cfg.conf_thresh, cfg.nms_iou);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    const double d = static_cast<double>(std::max<std::int64_t>(1, epoch_steps));
    rec.loss = acc.total / d;
    rec.box = acc.box / d;
    rec.obj = acc.obj / d;
    rec.cls = acc.cls / d;
    rec.precision = ev.summary.precision;
    rec.recall = ev.summary.recall;
    rec.map50 = ev.summary.map50;
    const std::string line = format_epoch(rec);
    metrics << line << "\n";
    metrics.flush();
    log << line << "\n";
    log.flush();
    summary.epochs.push_back(rec);

    const auto meta = checkpoint_metadata(cfg, step, rec.epoch, rec.map50);
    checkpoint_save(last_path, store, meta);
    if (rec.map50 > summary.best_map50) {
      summary.best_map50 = rec.map50;
      checkpoint_save(best_path, store, meta);
    }
  }
  summary.steps = step;
  summary.grad_evals = state.grad_evals;
  summary.final_map50 = summary.epochs.empty() ? 0.0 : summary.epochs.back().map50;
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return summary;
}

TrainSummary train(const RunConfig& cfg, std::ostream& log) {
  return train(cfg, load_samples(cfg, cfg.data), cfg.out, log);
}

}  // namespace byhd::app
