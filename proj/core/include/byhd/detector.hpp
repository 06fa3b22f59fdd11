#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "byhd/attention.hpp"
#include "byhd/box.hpp"
#include "byhd/ghost.hpp"
#include "byhd/layers.hpp"

namespace byhd {

enum class Variant { ghost, conv };

const char* variant_name(Variant v);

inline constexpr int kNumLevels = 3;
inline constexpr int kAnchorsPerLevel = 3;
inline constexpr std::array<int, kNumLevels> kStrides{8, 16, 32};

struct Anchor {
  double w = 0, h = 0;  // pixels
};

/// Hand-chosen anchors for the synthetic data, as fractions of the input
/// size and sorted by scale: three per level.
std::vector<Anchor> default_anchors(int input_size);

struct ModelSpec {
  Variant variant = Variant::ghost;
  double width_multiple = 0.25;
  double depth_multiple = 0.33;
  int num_classes = 2;
  int input_size = 256;
  bool use_ca = true;     // coordinate attention after every neck concat
  bool use_sc = true;     // self-calibrated conv inside SPPF
  bool use_dfc = true;    // DFC attention in ghost bottlenecks
  std::vector<Anchor> anchors;  // 9 entries; empty means default_anchors(input_size)
  Activation act = Activation::silu;

  /// base * width_multiple rounded up to a multiple of 8.
  int width(int base) const;
  /// max(round(base * depth_multiple), 1).
  int depth(int base) const;
  std::vector<Anchor> resolved_anchors() const;
  int outputs_per_anchor() const { return 5 + num_classes; }
  void validate() const;
};

/// Backbone (stem, four downsample + stage pairs, SPPF with optional
/// self-calibration), FPN+PAN neck with coordinate attention after each
/// concatenation, and three 1x1 prediction convs at strides 8, 16, 32.
template <typename T>
class Detector {
 public:
  Detector(const ModelSpec& spec, std::uint64_t seed);

  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;

  /// Raw head maps, one per level: (N, A*(5+K), S/stride, S/stride).
  std::vector<Tensor<T>> forward(const Tensor<T>& x, const Mode& mode);

  const ModelSpec& spec() const { return spec_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  /// Top-level module prefixes in build order.
  const std::vector<std::string>& modules() const { return modules_; }

  /// Human-readable graph: one line per module with shapes and counts.
  std::string describe() const;

 private:
  Tensor<T> stage(int i, const Tensor<T>& x, const Mode& mode);
  Tensor<T> neck_attention(int i, const Tensor<T>& x, const Mode& mode);

  ModelSpec spec_;
  ParamStore<T> store_;
  std::vector<std::string> modules_;
  std::vector<std::string> lines_;

  ConvBnAct<T> stem_;
  std::vector<ConvBnAct<T>> conv_down_;
  std::vector<C3<T>> conv_stage_;
  std::vector<GhostBottleneck<T>> ghost_down_;
  std::vector<GhostC3<T>> ghost_stage_;
  SppfSc<T> sppf_;

  ConvBnAct<T> lateral0_, lateral1_, down0_, down1_;
  std::vector<CoordAttention<T>> ca_;
  std::vector<C3<T>> neck_c3_;
  std::vector<Conv<T>> heads_;
};

/// Multiply-accumulate count (2 per MAC) of every conv in one forward pass
/// at the given input shape.
std::int64_t count_flops(const ModelSpec& spec, const Shape& input_shape);

/// Decodes raw head maps into detections per image, then per-class greedy
/// NMS. Boxes: xy = (2*sigmoid - 0.5 + cell) * stride,
/// wh = (2*sigmoid)^2 * anchor, clipped to the image; confidence =
/// objectness * best class probability; only confidence > conf_thresh kept.
template <typename T>
std::vector<std::vector<Detection>> decode_nms(const std::vector<Tensor<T>>& heads,
                                               const ModelSpec& spec, double conf_thresh,
                                               double iou_thresh, int max_det = 300);

/// Greedy per-class suppression: keeps a box only if its IoU with every kept
/// box of the same class is below iou_thresh. Result sorted by confidence
/// descending, ties in input order.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

}  // namespace byhd
