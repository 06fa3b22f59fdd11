#include "byhd/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "byhd/error.hpp"

namespace byhd {

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<GroundTruth>& gts, int class_id,
                             double iou_thresh) {
  MatchResult r;
  std::vector<std::size_t> gt_idx;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].class_id == class_id) gt_idx.push_back(i);
  }
  r.num_gt = gt_idx.size();
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].class_id == class_id) r.order.push_back(i);
  }
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<bool> used(gt_idx.size(), false);
  r.true_positive.reserve(r.order.size());
  for (const auto di : r.order) {
    const Detection& d = dets[di];
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gt_idx.size(); ++j) {
      const GroundTruth& g = gts[gt_idx[j]];
      if (used[j] || g.image_id != d.image_id) continue;
      const double v = iou(d.bbox, g.bbox);
      if (v > best) {
        best = v;
        best_j = j;
      }
    }
    const bool tp = best >= iou_thresh;
    if (tp) used[best_j] = true;
    r.true_positive.push_back(tp);
  }
  return r;
}

std::vector<CurvePoint> confidence_curve(const std::vector<Detection>& dets,
                                         const std::vector<GroundTruth>& gts, int class_id,
                                         double iou_thresh) {
  const auto m = match_detections(dets, gts, class_id, iou_thresh);
  std::vector<CurvePoint> curve;
  curve.reserve(m.order.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    if (m.true_positive[k]) ++tp;
    // Tied confidences enter together; one point per distinct threshold.
    if (k + 1 < m.order.size() && dets[m.order[k + 1]].confidence == dets[m.order[k]].confidence)
      continue;
    CurvePoint p;
    p.confidence = dets[m.order[k]].confidence;
    p.precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    p.recall = m.num_gt > 0 ? static_cast<double>(tp) / static_cast<double>(m.num_gt) : 0.0;
    curve.push_back(p);
  }
  return curve;
}

double pr_area(const std::vector<CurvePoint>& curve) {
  double area = 0.0;
  double prev_recall = 0.0;
  // Suffix maxima of precision give the interpolated envelope.
  std::vector<double> env(curve.size());
  double run = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    run = std::max(run, curve[i].precision);
    env[i] = run;
  }
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].recall > prev_recall) {
      area += (curve[i].recall - prev_recall) * env[i];
      prev_recall = curve[i].recall;
    }
  }
  return area;
}

std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruth>& gts, int class_id,
                                        double iou_thresh) {
  const bool any = std::any_of(gts.begin(), gts.end(),
                               [&](const GroundTruth& g) { return g.class_id == class_id; });
  if (!any) return std::nullopt;
  return pr_area(confidence_curve(dets, gts, class_id, iou_thresh));
}

namespace {

struct ClassSweep {
  std::vector<double> conf;  // descending
  std::vector<std::size_t> cum_tp;
  std::size_t num_gt = 0;

  /// (tp, admitted) for threshold t (confidence >= t).
  std::pair<std::size_t, std::size_t> at(double t) const {
    const auto it = std::upper_bound(conf.begin(), conf.end(), t, std::greater<double>());
    const auto k = static_cast<std::size_t>(it - conf.begin());
    return {k > 0 ? cum_tp[k - 1] : 0, k};
  }
};

ClassSweep sweep(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                 int class_id, double iou_thresh) {
  const auto m = match_detections(dets, gts, class_id, iou_thresh);
  ClassSweep s;
  s.num_gt = m.num_gt;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    if (m.true_positive[k]) ++tp;
    s.conf.push_back(dets[m.order[k]].confidence);
    s.cum_tp.push_back(tp);
  }
  return s;
}

struct PrAt {
  double precision = 0, recall = 0, f1 = 0;
};

PrAt mean_at(const std::vector<ClassSweep>& sweeps, double t) {
  PrAt out;
  int n = 0;
  for (const auto& s : sweeps) {
    if (s.num_gt == 0) continue;
    const auto [tp, k] = s.at(t);
    const double p = k > 0 ? static_cast<double>(tp) / static_cast<double>(k) : 0.0;
    const double r = static_cast<double>(tp) / static_cast<double>(s.num_gt);
    out.precision += p;
    out.recall += r;
    out.f1 += (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
    ++n;
  }
  if (n > 0) {
    out.precision /= n;
    out.recall /= n;
    out.f1 /= n;
  }
  return out;
}

}  // namespace

MetricsSummary map50(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                     int num_classes, double iou_thresh) {
  MetricsSummary s;
  double total = 0.0;
  int defined = 0;
  std::vector<ClassSweep> sweeps;
  for (int c = 0; c < num_classes; ++c) {
    const auto ap = average_precision(dets, gts, c, iou_thresh);
    s.ap[c] = ap;
    if (ap) {
      total += *ap;
      ++defined;
    }
    sweeps.push_back(sweep(dets, gts, c, iou_thresh));
  }
  if (defined == 0) throw ContractError("map50: no class has ground truth");
  s.map50 = total / defined;

  std::vector<double> thresholds;
  for (const auto& d : dets) thresholds.push_back(d.confidence);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double best_f1 = -1.0;
  for (const double t : thresholds) {
    const auto pr = mean_at(sweeps, t);
    if (pr.f1 > best_f1) {
      best_f1 = pr.f1;
      s.precision = pr.precision;
      s.recall = pr.recall;
      s.confidence = t;
    }
  }
  return s;
}

std::pair<double, double> precision_recall_at(const std::vector<Detection>& dets,
                                              const std::vector<GroundTruth>& gts,
                                              int num_classes, double threshold,
                                              double iou_thresh) {
  std::vector<ClassSweep> sweeps;
  for (int c = 0; c < num_classes; ++c) sweeps.push_back(sweep(dets, gts, c, iou_thresh));
  const auto pr = mean_at(sweeps, threshold);
  return {pr.precision, pr.recall};
}

void write_curves(const std::string& dir, const std::string& name,
                  const std::vector<CurvePoint>& curve) {
  for (const char* kind : {"precision_confidence", "precision_recall", "recall_confidence"}) {
    const std::string path = dir + "/" + name + "_" + kind + ".csv";
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "confidence,precision,recall\n";
    char buf[128];
    for (const auto& p : curve) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.confidence, p.precision, p.recall);
      os << buf;
    }
    if (!os) throw IoError("failed writing " + path);
  }
}

std::vector<CurvePoint> read_curve(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  std::string line;
  std::getline(is, line);
  if (line != "confidence,precision,recall") throw ParseError(path + ": unexpected header");
  std::vector<CurvePoint> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    CurvePoint p;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> p.confidence >> c1 >> p.precision >> c2 >> p.recall) || c1 != ',' || c2 != ',') {
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace byhd
