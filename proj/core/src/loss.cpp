#include "byhd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace byhd {

namespace {

double shape_ratio(double tw, double th, double aw, double ah) {
  return std::max({tw / aw, aw / tw, th / ah, ah / th});
}

}  // namespace

std::vector<Assignment> assign_targets(const std::vector<GroundTruth>& targets,
                                       const ModelSpec& spec, const LossConfig& cfg) {
  const auto anchors = spec.resolved_anchors();
  std::vector<Assignment> out;
  std::vector<double> score;
  std::map<std::tuple<int, int, std::int64_t, std::int64_t, std::int64_t>, std::size_t> slots;

  auto place = [&](const GroundTruth& t, int l, int a, double ratio, bool neighbours) {
    const double stride = kStrides[static_cast<std::size_t>(l)];
    const std::int64_t grid = spec.input_size / kStrides[static_cast<std::size_t>(l)];
    const double gxf = t.bbox.cx() / stride;
    const double gyf = t.bbox.cy() / stride;
    const auto gi = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(gxf)), 0, grid - 1);
    const auto gj = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(gyf)), 0, grid - 1);
    std::vector<std::pair<std::int64_t, std::int64_t>> cells{{gi, gj}};
    if (neighbours) {
      const double fx = gxf - std::floor(gxf);
      const double fy = gyf - std::floor(gyf);
      if (fx < 0.5 && gxf > 1.0) cells.emplace_back(gi - 1, gj);
      if (fx > 0.5 && gxf < grid - 1.0) cells.emplace_back(gi + 1, gj);
      if (fy < 0.5 && gyf > 1.0) cells.emplace_back(gi, gj - 1);
      if (fy > 0.5 && gyf < grid - 1.0) cells.emplace_back(gi, gj + 1);
    }
    for (const auto& [cx, cy] : cells) {
      Assignment as;
      as.level = l;
      as.anchor = a;
      as.image = t.image_id;
      as.gx = cx;
      as.gy = cy;
      as.tx = gxf - cx;
      as.ty = gyf - cy;
      as.tw = t.bbox.width() / stride;
      as.th = t.bbox.height() / stride;
      as.class_id = t.class_id;
      const auto key = std::make_tuple(l, a, t.image_id, cy, cx);
      const auto it = slots.find(key);
      if (it == slots.end()) {
        slots.emplace(key, out.size());
        out.push_back(as);
        score.push_back(ratio);
      } else if (ratio < score[it->second]) {
        out[it->second] = as;
        score[it->second] = ratio;
      }
    }
  };

  for (const auto& t : targets) {
    if (!(t.bbox.width() > 0.0) || !(t.bbox.height() > 0.0)) continue;
    if (t.class_id < 0 || t.class_id >= spec.num_classes) {
      throw ValidationError("loss: target class " + std::to_string(t.class_id) + " out of range");
    }
    bool matched = false;
    int best_l = 0, best_a = 0;
    double best_r = 1e300;
    for (int l = 0; l < kNumLevels; ++l) {
      for (int a = 0; a < kAnchorsPerLevel; ++a) {
        const Anchor& anc = anchors[static_cast<std::size_t>(l * kAnchorsPerLevel + a)];
        const double r = shape_ratio(t.bbox.width(), t.bbox.height(), anc.w, anc.h);
        if (r < best_r) {
          best_r = r;
          best_l = l;
          best_a = a;
        }
        if (r < cfg.anchor_t) {
          place(t, l, a, r, true);
          matched = true;
        }
      }
    }
    if (!matched) place(t, best_l, best_a, best_r, false);
  }
  return out;
}

template <typename T>
LossParts<T> detection_loss(const std::vector<Tensor<T>>& heads,
                            const std::vector<GroundTruth>& targets, const ModelSpec& spec,
                            const LossConfig& cfg, LossConstants* constants) {
  if (heads.size() != kNumLevels) throw DimensionError("loss: expected three head maps");
  const int no = spec.outputs_per_anchor();
  const int k_cls = spec.num_classes;
  const auto anchors = spec.resolved_anchors();
  const auto assignments = assign_targets(targets, spec, cfg);
  const bool reuse = constants != nullptr && constants->frozen;
  constexpr double eps = 1e-7;

  Tensor<T> box = Tensor<T>::scalar(T(0));
  Tensor<T> obj = Tensor<T>::scalar(T(0));
  Tensor<T> cls = Tensor<T>::scalar(T(0));
  bool any_box = false;

  for (int l = 0; l < kNumLevels; ++l) {
    const Tensor<T>& h = heads[static_cast<std::size_t>(l)];
    if (h.rank() != 4 || h.dim(1) != kAnchorsPerLevel * no) {
      throw DimensionError("loss: head " + std::to_string(l) + " has shape " + shape_str(h.shape()));
    }
    const auto n = h.dim(0), gh = h.dim(2), gw = h.dim(3);
    auto index = [&](std::int64_t img, int a, int k, std::int64_t gy, std::int64_t gx) {
      return ((img * kAnchorsPerLevel * no + a * no + k) * gh + gy) * gw + gx;
    };

    std::vector<const Assignment*> mine;
    for (const auto& as : assignments) {
      if (as.level == l && as.image < n && as.gx < gw && as.gy < gh) mine.push_back(&as);
    }
    const auto m = static_cast<std::int64_t>(mine.size());
    std::vector<double> tobj(static_cast<std::size_t>(n * kAnchorsPerLevel * gh * gw), 0.0);

    if (m > 0) {
      std::vector<std::int64_t> idx;
      idx.reserve(static_cast<std::size_t>(m * no));
      std::vector<T> tx, ty, tw, th, aw, ah;
      std::vector<T> onehot(static_cast<std::size_t>(m * k_cls), T(0));
      for (std::int64_t i = 0; i < m; ++i) {
        const Assignment& as = *mine[static_cast<std::size_t>(i)];
        for (int k = 0; k < no; ++k) idx.push_back(index(as.image, as.anchor, k, as.gy, as.gx));
        const double stride = kStrides[static_cast<std::size_t>(l)];
        const Anchor& anc = anchors[static_cast<std::size_t>(l * kAnchorsPerLevel + as.anchor)];
        tx.push_back(static_cast<T>(as.tx));
        ty.push_back(static_cast<T>(as.ty));
        tw.push_back(static_cast<T>(as.tw));
        th.push_back(static_cast<T>(as.th));
        aw.push_back(static_cast<T>(anc.w / stride));
        ah.push_back(static_cast<T>(anc.h / stride));
        onehot[static_cast<std::size_t>(i * k_cls + as.class_id)] = T(1);
      }
      const Shape col{m, 1};
      auto constant = [&](std::vector<T> v) { return Tensor<T>(col, std::move(v)); };
      Tensor<T> pred = take(h, idx, {m, no});
      auto part = [&](int k) { return slice(pred, 1, k, 1); };
      // pxy = 2*sigmoid - 0.5, pwh = (2*sigmoid)^2 * anchor, grid units.
      Tensor<T> px = add_scalar(scale(sigmoid(part(0)), T(2)), T(-0.5));
      Tensor<T> py = add_scalar(scale(sigmoid(part(1)), T(2)), T(-0.5));
      Tensor<T> pw = mul(square(scale(sigmoid(part(2)), T(2))), constant(aw));
      Tensor<T> ph = mul(square(scale(sigmoid(part(3)), T(2))), constant(ah));

      const Tensor<T> gx = constant(tx), gy = constant(ty), gwt = constant(tw), ght = constant(th);
      const T half(0.5);
      Tensor<T> b1x1 = sub(px, scale(pw, half)), b1x2 = add(px, scale(pw, half));
      Tensor<T> b1y1 = sub(py, scale(ph, half)), b1y2 = add(py, scale(ph, half));
      Tensor<T> b2x1 = sub(gx, scale(gwt, half)), b2x2 = add(gx, scale(gwt, half));
      Tensor<T> b2y1 = sub(gy, scale(ght, half)), b2y2 = add(gy, scale(ght, half));
      Tensor<T> iw = relu(sub(minimum(b1x2, b2x2), maximum(b1x1, b2x1)));
      Tensor<T> ih = relu(sub(minimum(b1y2, b2y2), maximum(b1y1, b2y1)));
      Tensor<T> inter = mul(iw, ih);
      Tensor<T> uni = add_scalar(sub(add(mul(pw, ph), mul(gwt, ght)), inter), static_cast<T>(eps));
      Tensor<T> iou_t = div(inter, uni);
      Tensor<T> cw = sub(maximum(b1x2, b2x2), minimum(b1x1, b2x1));
      Tensor<T> ch = sub(maximum(b1y2, b2y2), minimum(b1y1, b2y1));
      Tensor<T> c2 = add_scalar(add(square(cw), square(ch)), static_cast<T>(eps));
      Tensor<T> rho2 = scale(add(square(sub(add(b2x1, b2x2), add(b1x1, b1x2))),
                                 square(sub(add(b2y1, b2y2), add(b1y1, b1y2)))),
                             T(0.25));
      Tensor<T> v = scale(square(sub(atan(div(gwt, ght)),
                                     atan(div(pw, add_scalar(ph, static_cast<T>(eps)))))),
                          static_cast<T>(4.0 / (M_PI * M_PI)));
      std::vector<double>* alpha_store =
          constants != nullptr ? &constants->alpha[static_cast<std::size_t>(l)] : nullptr;
      std::vector<T> alpha(static_cast<std::size_t>(m));
      for (std::int64_t i = 0; i < m; ++i) {
        const double vi = v.ptr()[i];
        const double ii = iou_t.ptr()[i];
        alpha[static_cast<std::size_t>(i)] =
            reuse ? static_cast<T>((*alpha_store)[static_cast<std::size_t>(i)])
                  : static_cast<T>(vi / (vi - ii + 1.0 + eps));
      }
      if (alpha_store != nullptr && !reuse) alpha_store->assign(alpha.begin(), alpha.end());
      Tensor<T> ciou = sub(iou_t, add(div(rho2, c2), mul(v, constant(alpha))));
      box = add(box, mean(add_scalar(scale(ciou, T(-1)), T(1))));
      any_box = true;

      if (constants != nullptr && !reuse) constants->obj_target[static_cast<std::size_t>(l)].clear();
      for (std::int64_t i = 0; i < m; ++i) {
        const Assignment& as = *mine[static_cast<std::size_t>(i)];
        const double target = reuse ? constants->obj_target[static_cast<std::size_t>(l)]
                                                           [static_cast<std::size_t>(i)]
                                    : std::max(0.0, static_cast<double>(ciou.ptr()[i]));
        tobj[static_cast<std::size_t>(((as.image * kAnchorsPerLevel + as.anchor) * gh + as.gy) *
                                          gw +
                                      as.gx)] = target;
        if (constants != nullptr && !reuse) {
          constants->obj_target[static_cast<std::size_t>(l)].push_back(target);
        }
      }

      Tensor<T> cls_logits = slice(pred, 1, 5, k_cls);
      cls = add(cls, bce_with_logits(cls_logits, Tensor<T>({m, k_cls}, onehot), Tensor<T>(),
                                     static_cast<double>(m * k_cls)));
    } else if (constants != nullptr && !reuse) {
      constants->alpha[static_cast<std::size_t>(l)].clear();
      constants->obj_target[static_cast<std::size_t>(l)].clear();
    }

    std::vector<std::int64_t> obj_idx;
    obj_idx.reserve(tobj.size());
    for (std::int64_t img = 0; img < n; ++img) {
      for (int a = 0; a < kAnchorsPerLevel; ++a) {
        for (std::int64_t y = 0; y < gh; ++y) {
          for (std::int64_t x = 0; x < gw; ++x) obj_idx.push_back(index(img, a, 4, y, x));
        }
      }
    }
    const auto count = static_cast<std::int64_t>(obj_idx.size());
    Tensor<T> obj_logits = take(h, obj_idx, {count});
    std::vector<T> tobj_t(tobj.begin(), tobj.end());
    Tensor<T> lobj = bce_with_logits(obj_logits, Tensor<T>({count}, tobj_t), Tensor<T>(),
                                     static_cast<double>(count));
    obj = add(obj, scale(lobj, static_cast<T>(cfg.balance[static_cast<std::size_t>(l)])));
  }
  if (constants != nullptr) constants->frozen = true;

  LossParts<T> parts;
  parts.box = any_box ? scale(box, static_cast<T>(cfg.box_gain)) : box;
  parts.obj = scale(obj, static_cast<T>(cfg.obj_gain));
  parts.cls = any_box ? scale(cls, static_cast<T>(cfg.cls_gain)) : cls;
  parts.total = add(add(parts.box, parts.obj), parts.cls);
  return parts;
}

template LossParts<float> detection_loss(const std::vector<Tensor<float>>&,
                                         const std::vector<GroundTruth>&, const ModelSpec&,
                                         const LossConfig&, LossConstants*);
template LossParts<double> detection_loss(const std::vector<Tensor<double>>&,
                                          const std::vector<GroundTruth>&, const ModelSpec&,
                                          const LossConfig&, LossConstants*);

}  // namespace byhd
