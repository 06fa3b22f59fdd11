#pragma once

// Reference implementations shared by the unit suites and the acceptance
// binary. Each one is written from the definitions, without calling the code
// it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "byhd/box.hpp"
#include "byhd/ops.hpp"

namespace byhd::oracle {

/// Precision and recall after admitting every detection with confidence >= cut.
struct Cut {
  double confidence = 0;
  double precision = 0;
  double recall = 0;
};

inline std::vector<bool> greedy_match(const std::vector<Detection>& admitted,
                                      const std::vector<GroundTruth>& gts, int cls,
                                      double thr) {
  std::vector<std::size_t> idx(admitted.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return admitted[a].confidence > admitted[b].confidence;
  });
  std::vector<bool> used(gts.size(), false), tp(admitted.size(), false);
  for (auto i : idx) {
    const auto& d = admitted[i];
    double best = -1;
    std::size_t pick = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].class_id != cls || gts[g].image_id != d.image_id) continue;
      const double v = iou(d.bbox, gts[g].bbox);
      if (v >= thr && v > best) {
        best = v;
        pick = g;
      }
    }
    if (pick < gts.size()) {
      used[pick] = true;
      tp[i] = true;
    }
  }
  return tp;
}

/// Every distinct confidence taken as a threshold, matching redone from
/// scratch for each one.
inline std::vector<Cut> all_cuts(const std::vector<Detection>& dets,
                                 const std::vector<GroundTruth>& gts, int cls, double thr) {
  std::vector<double> confs;
  for (const auto& d : dets)
    if (d.class_id == cls) confs.push_back(d.confidence);
  std::sort(confs.begin(), confs.end(), std::greater<>());
  confs.erase(std::unique(confs.begin(), confs.end()), confs.end());
  std::size_t n_gt = 0;
  for (const auto& g : gts) n_gt += g.class_id == cls;
  std::vector<Cut> cuts;
  for (double c : confs) {
    std::vector<Detection> admitted;
    for (const auto& d : dets)
      if (d.class_id == cls && d.confidence >= c) admitted.push_back(d);
    const auto tp = greedy_match(admitted, gts, cls, thr);
    const double n_tp = static_cast<double>(std::count(tp.begin(), tp.end(), true));
    cuts.push_back({c, n_tp / static_cast<double>(admitted.size()),
                    n_gt ? n_tp / static_cast<double>(n_gt) : 0.0});
  }
  return cuts;
}

/// Exact area under the all-points interpolated PR curve: for each recall
/// level reached, the best precision among cuts at or above that recall.
inline double all_cuts_ap(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                          int cls, double thr = 0.5) {
  const auto cuts = all_cuts(dets, gts, cls, thr);
  std::vector<double> levels;
  for (const auto& c : cuts) levels.push_back(c.recall);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double area = 0, prev = 0;
  for (double r : levels) {
    double p = 0;
    for (const auto& c : cuts)
      if (c.recall >= r) p = std::max(p, c.precision);
    area += (r - prev) * p;
    prev = r;
  }
  return area;
}

/// Dense per-axis aggregation: a[c,h,w] = sum_h' FH[c,h,h'] z[c,h',w], then
/// b[c,h,w] = sum_w' FW[c,w,w'] a[c,h,w']. `fh` is (C,H,H), `fw` is (C,W,W),
/// `z` is (N,C,H,W), all row-major.
inline std::vector<double> per_axis_aggregate(const std::vector<double>& z, std::int64_t n,
                                              std::int64_t c, std::int64_t h, std::int64_t w,
                                              const std::vector<double>& fh,
                                              const std::vector<double>& fw, bool along_w) {
  std::vector<double> out(z.size(), 0.0);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) {
          double acc = 0;
          if (!along_w) {
            for (std::int64_t k = 0; k < h; ++k)
              acc += fh[(ch * h + i) * h + k] * z[((b * c + ch) * h + k) * w + j];
          } else {
            for (std::int64_t k = 0; k < w; ++k)
              acc += fw[(ch * w + j) * w + k] * z[((b * c + ch) * h + i) * w + k];
          }
          out[((b * c + ch) * h + i) * w + j] = acc;
        }
  return out;
}

/// Eval-mode per-channel affine normalization.
inline void normalize_eval(std::vector<double>& v, std::int64_t n, std::int64_t c,
                           std::int64_t hw, const std::vector<double>& gamma,
                           const std::vector<double>& beta, const std::vector<double>& mean,
                           const std::vector<double>& var, double eps = 1e-5) {
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t k = 0; k < hw; ++k) {
        auto& x = v[static_cast<std::size_t>((b * c + ch) * hw + k)];
        x = gamma[ch] * (x - mean[ch]) / std::sqrt(var[ch] + eps) + beta[ch];
      }
}

/// L(t) = min(0.5*100*(t+1)^2, 0.5*(t-1)^2): a sharp well at -1 and a flat
/// one at +1, both with minimum value 0.
struct TwoWell {
  static constexpr double sharp_curv = 100.0;
  static constexpr double flat_curv = 1.0;
  static double sharp(double t) { return 0.5 * sharp_curv * (t + 1) * (t + 1); }
  static double flat(double t) { return 0.5 * flat_curv * (t - 1) * (t - 1); }
  static double loss(double t) { return std::min(sharp(t), flat(t)); }
  static double grad(double t) {
    return sharp(t) <= flat(t) ? sharp_curv * (t + 1) : flat_curv * (t - 1);
  }
  static bool in_flat_basin(double t) { return flat(t) < sharp(t); }
  static std::vector<double> grid() {
    std::vector<double> g;
    for (int i = 0; i <= 20; ++i) g.push_back(-2.0 + 0.2 * i);
    return g;
  }
};

}  // namespace byhd::oracle
