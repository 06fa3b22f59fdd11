#pragma once

#include <array>
#include <vector>

#include "byhd/box.hpp"
#include "byhd/detector.hpp"

namespace byhd {

struct LossConfig {
  double box_gain = 0.05;
  double obj_gain = 1.0;
  double cls_gain = 0.5;
  double anchor_t = 4.0;  // max width/height ratio between target and anchor
  std::array<double, kNumLevels> balance{4.0, 1.0, 0.4};
};

/// One (target, level, anchor, cell) training pair.
struct Assignment {
  int level = 0;
  int anchor = 0;
  std::int64_t image = 0;
  std::int64_t gx = 0, gy = 0;
  double tx = 0, ty = 0;  // target center relative to the cell, grid units
  double tw = 0, th = 0;  // target size, grid units
  int class_id = 0;
};

/// Ratio-threshold assignment over all levels and anchors. Each target
/// claims its own cell plus the two nearest neighbour cells; when several
/// targets land on one (level, anchor, image, cell) slot, the one whose
/// shape best matches the anchor wins. A target matching no anchor falls
/// back to the single best-shape anchor.
std::vector<Assignment> assign_targets(const std::vector<GroundTruth>& targets,
                                       const ModelSpec& spec, const LossConfig& cfg);

/// Values that the loss treats as constants (the CIoU aspect weight and the
/// IoU-valued objectness targets). A gradient check freezes them so finite
/// differences see the same function reverse mode differentiates.
struct LossConstants {
  bool frozen = false;
  std::array<std::vector<double>, kNumLevels> alpha;
  std::array<std::vector<double>, kNumLevels> obj_target;
};

template <typename T>
struct LossParts {
  Tensor<T> total, box, obj, cls;  // scalars; total = box + obj + cls, each gain-weighted
};

/// Box loss 1 - CIoU on matched pairs, objectness BCE over every anchor
/// slot (target = clamped detached IoU at matched slots, 0 elsewhere) with
/// per-level balance, class BCE on matched pairs. GroundTruth.image_id is
/// the index within the batch.
template <typename T>
LossParts<T> detection_loss(const std::vector<Tensor<T>>& heads,
                            const std::vector<GroundTruth>& targets, const ModelSpec& spec,
                            const LossConfig& cfg, LossConstants* constants = nullptr);

}  // namespace byhd
