#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "byhd/config.hpp"
#include "byhd/data.hpp"
#include "byhd/detector.hpp"
#include "byhd/metrics.hpp"

namespace byhd::app {

struct EpochRecord {
  std::int64_t epoch = 0;
  double loss = 0, box = 0, obj = 0, cls = 0;
  double precision = 0, recall = 0, map50 = 0;
};

/// "epoch=1 loss=... box=... obj=... cls=... precision=... recall=... map50=..."
std::string format_epoch(const EpochRecord& r);

struct TrainSummary {
  std::vector<EpochRecord> epochs;
  std::int64_t steps = 0;
  std::int64_t grad_evals = 0;
  double best_map50 = 0;
  double final_map50 = 0;
  double seconds = 0;
};

struct EvalOutput {
  MetricsSummary summary;
  std::vector<Detection> detections;  // image_id = position in the evaluated list
  std::vector<GroundTruth> truth;
};

/// Eval-mode inference over `indices` of `samples` and mAP@0.5 scoring.
EvalOutput evaluate(Detector<float>& model, const std::vector<Sample>& samples,
                    const std::vector<std::size_t>& indices, double conf_thresh, double nms_iou,
                    std::int64_t batch_size = 16);

/// Trains per `cfg` on `samples` (split by cfg.split and cfg.seed), writing
/// metrics.log, last.ckpt and best.ckpt under `out_dir`. Progress goes to
/// `log`. A non-finite loss throws NumericError naming the step.
TrainSummary train(const RunConfig& cfg, const std::vector<Sample>& samples,
                   const std::string& out_dir, std::ostream& log);

/// Loads the dataset from cfg.data and trains.
TrainSummary train(const RunConfig& cfg, std::ostream& log);

std::vector<Sample> load_samples(const RunConfig& cfg, const std::string& data_dir);

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<Detector<float>> model;
  std::int64_t step = 0;
};

/// Rebuilds the model from the configuration stored in the checkpoint.
/// Files that are not checkpoints or whose tensors do not fit the stored
/// configuration throw ConfigError.
LoadedModel load_checkpoint(const std::string& path);

std::vector<std::pair<std::string, std::string>> checkpoint_metadata(const RunConfig& cfg,
                                                                     std::int64_t step,
                                                                     std::int64_t epoch,
                                                                     double map50);

}  // namespace byhd::app
