#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "byhd/box.hpp"

namespace byhd {

/// One point of the precision/recall sweep, taken after admitting every
/// detection with confidence >= `confidence`.
struct CurvePoint {
  double confidence = 0;
  double precision = 0;
  double recall = 0;
};

/// Greedy matching in descending confidence (ties keep input order): each
/// detection takes the highest-IoU unmatched ground truth of its class and
/// image with IoU >= iou_thresh. Returns one flag per detection in the
/// sorted order, alongside that order.
struct MatchResult {
  std::vector<std::size_t> order;  // indices into the detection list, sorted
  std::vector<bool> true_positive; // aligned with order
  std::size_t num_gt = 0;
};

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<GroundTruth>& gts, int class_id,
                             double iou_thresh = 0.5);

/// Cumulative precision/recall after each sorted detection; one point per
/// distinct confidence (the last detection of a tie group). Sorted by
/// descending confidence, recall non-decreasing.
std::vector<CurvePoint> confidence_curve(const std::vector<Detection>& dets,
                                         const std::vector<GroundTruth>& gts, int class_id,
                                         double iou_thresh = 0.5);

/// All-points interpolated area under a PR curve: sum over recall steps of
/// (r_i - r_{i-1}) * max precision at recall >= r_i.
double pr_area(const std::vector<CurvePoint>& curve);

/// Absent when the class has no ground truth.
std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruth>& gts, int class_id,
                                        double iou_thresh = 0.5);

struct MetricsSummary {
  double map50 = 0;
  std::map<int, std::optional<double>> ap;  // per class
  double precision = 0;   // class-mean, at the confidence maximizing mean F1
  double recall = 0;
  double confidence = 0;  // that confidence
};

/// Mean of the defined per-class APs. Throws ContractError when no class
/// has ground truth.
MetricsSummary map50(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                     int num_classes, double iou_thresh = 0.5);

/// Precision/recall at a fixed confidence threshold (detections with
/// confidence >= threshold), class-mean over classes with ground truth.
std::pair<double, double> precision_recall_at(const std::vector<Detection>& dets,
                                              const std::vector<GroundTruth>& gts,
                                              int num_classes, double threshold,
                                              double iou_thresh = 0.5);

/// Writes <dir>/<name>_precision_confidence.csv, _precision_recall.csv and
/// _recall_confidence.csv, header "confidence,precision,recall".
void write_curves(const std::string& dir, const std::string& name,
                  const std::vector<CurvePoint>& curve);

/// Reads a curve file written by write_curves.
std::vector<CurvePoint> read_curve(const std::string& path);

}  // namespace byhd
