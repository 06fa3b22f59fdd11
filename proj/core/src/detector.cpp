#include "byhd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace byhd {

const char* variant_name(Variant v) { return v == Variant::ghost ? "ghost" : "conv"; }

std::vector<Anchor> default_anchors(int input_size) {
  static const double fractions[9][2] = {{0.10, 0.10}, {0.14, 0.13}, {0.18, 0.16},
                                         {0.20, 0.20}, {0.26, 0.22}, {0.30, 0.26},
                                         {0.36, 0.32}, {0.44, 0.34}, {0.55, 0.45}};
  std::vector<Anchor> out;
  for (const auto& f : fractions) out.push_back({f[0] * input_size, f[1] * input_size});
  return out;
}

int ModelSpec::width(int base) const {
  const double w = base * width_multiple;
  return std::max(8, static_cast<int>(std::ceil(w / 8.0 - 1e-9)) * 8);
}

int ModelSpec::depth(int base) const {
  return std::max(1, static_cast<int>(std::lround(base * depth_multiple)));
}

std::vector<Anchor> ModelSpec::resolved_anchors() const {
  return anchors.empty() ? default_anchors(input_size) : anchors;
}

void ModelSpec::validate() const {
  if (!(width_multiple > 0.0) || !(depth_multiple > 0.0) || width_multiple > 4.0 ||
      depth_multiple > 4.0) {
    throw ConfigError("model: width and depth multiples must lie in (0, 4]");
  }
  if (num_classes < 1) throw ConfigError("model: num_classes must be >= 1");
  if (input_size < 32 || input_size % 32 != 0) {
    throw ConfigError("model: input_size must be a positive multiple of 32, got " +
                      std::to_string(input_size));
  }
  if (!anchors.empty() && anchors.size() != kNumLevels * kAnchorsPerLevel) {
    throw ConfigError("model: expected 9 anchors");
  }
}

namespace {

struct Recorder {
  std::vector<std::string>* modules;
  std::vector<std::string>* lines;
  const void* store;

  template <typename T>
  void note(const ParamStore<T>& s, const std::string& prefix, const std::string& what) {
    modules->push_back(prefix);
    std::ostringstream os;
    os << prefix << "  " << what << "  params=" << s.count(prefix + ".");
    lines->push_back(os.str());
  }
};

}  // namespace

template <typename T>
Detector<T>::Detector(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  if (spec_.anchors.empty()) spec_.anchors = default_anchors(spec_.input_size);
  Rng rng(seed);
  Builder<T> root(store_, rng);
  Recorder rec{&modules_, &lines_, &store_};
  const Activation act = spec_.act;
  const bool ghost = spec_.variant == Variant::ghost;
  auto dim = [](int c_in, int c_out, const char* extra = "") {
    return std::to_string(c_in) + "->" + std::to_string(c_out) + extra;
  };

  const int c1 = spec_.width(64);
  const std::array<int, 4> cs{spec_.width(128), spec_.width(256), spec_.width(512),
                             spec_.width(1024)};
  const std::array<int, 4> ds{spec_.depth(3), spec_.depth(6), spec_.depth(9), spec_.depth(3)};

  Builder<T> bb = root.sub("backbone");
  stem_ = ConvBnAct<T>(bb.sub("stem"), ConvShape::square(3, c1, 3, 2), act);
  rec.note(store_, bb.name("stem"), "conv k3 s2 " + dim(3, c1));
  int prev = c1;
  for (int i = 0; i < 4; ++i) {
    const std::string down = "down" + std::to_string(i);
    const std::string st = "stage" + std::to_string(i);
    if (ghost) {
      GhostBottleneckSpec s;
      s.c_in = prev;
      s.c_out = cs[static_cast<std::size_t>(i)];
      s.stride = 2;
      s.use_dfc = spec_.use_dfc;
      s.act = act;
      ghost_down_.emplace_back(bb.sub(down), s);
      rec.note(store_, bb.name(down), "ghost_bottleneck s2 " + dim(prev, s.c_out));
      ghost_stage_.emplace_back(bb.sub(st), s.c_out, s.c_out, ds[static_cast<std::size_t>(i)],
                                spec_.use_dfc, act);
      rec.note(store_, bb.name(st),
               "ghost_c3 n=" + std::to_string(ds[static_cast<std::size_t>(i)]) + " " +
                   dim(s.c_out, s.c_out));
    } else {
      const int c = cs[static_cast<std::size_t>(i)];
      conv_down_.emplace_back(bb.sub(down), ConvShape::square(prev, c, 3, 2), act);
      rec.note(store_, bb.name(down), "conv k3 s2 " + dim(prev, c));
      conv_stage_.emplace_back(bb.sub(st), c, c, ds[static_cast<std::size_t>(i)], true, act);
      rec.note(store_, bb.name(st),
               "c3 n=" + std::to_string(ds[static_cast<std::size_t>(i)]) + " " + dim(c, c));
    }
    prev = cs[static_cast<std::size_t>(i)];
  }
  SppfScSpec sp;
  sp.c_in = cs[3];
  sp.c_out = cs[3];
  sp.use_sc = spec_.use_sc;
  sppf_ = SppfSc<T>(bb.sub("sppf"), sp, act);
  rec.note(store_, bb.name("sppf"),
           std::string(spec_.use_sc ? "sppf+scconv " : "sppf ") + dim(cs[3], cs[3]));

  const int c3 = cs[1], c4 = cs[2], c5 = cs[3];
  const int nd = spec_.depth(3);
  Builder<T> nk = root.sub("neck");
  auto add_ca = [&](int i, int channels) {
    if (!spec_.use_ca) return;
    CoordAttnSpec s;
    s.channels = channels;
    const std::string name = "ca" + std::to_string(i);
    ca_.emplace_back(nk.sub(name), s);
    rec.note(store_, nk.name(name), "coord_attention c=" + std::to_string(channels));
  };
  auto add_c3 = [&](int i, int c_in, int c_out) {
    const std::string name = "c3_" + std::to_string(i);
    neck_c3_.emplace_back(nk.sub(name), c_in, c_out, nd, false, act);
    rec.note(store_, nk.name(name), "c3 n=" + std::to_string(nd) + " " + dim(c_in, c_out));
  };
  lateral0_ = ConvBnAct<T>(nk.sub("lateral0"), ConvShape::square(c5, c4, 1), act);
  rec.note(store_, nk.name("lateral0"), "conv k1 " + dim(c5, c4));
  add_ca(0, 2 * c4);
  add_c3(0, 2 * c4, c4);
  lateral1_ = ConvBnAct<T>(nk.sub("lateral1"), ConvShape::square(c4, c3, 1), act);
  rec.note(store_, nk.name("lateral1"), "conv k1 " + dim(c4, c3));
  add_ca(1, 2 * c3);
  add_c3(1, 2 * c3, c3);
  down0_ = ConvBnAct<T>(nk.sub("down0"), ConvShape::square(c3, c3, 3, 2), act);
  rec.note(store_, nk.name("down0"), "conv k3 s2 " + dim(c3, c3));
  add_ca(2, 2 * c3);
  add_c3(2, 2 * c3, c4);
  down1_ = ConvBnAct<T>(nk.sub("down1"), ConvShape::square(c4, c4, 3, 2), act);
  rec.note(store_, nk.name("down1"), "conv k3 s2 " + dim(c4, c4));
  add_ca(3, 2 * c4);
  add_c3(3, 2 * c4, c5);

  Builder<T> hd = root.sub("head");
  const int no = spec_.outputs_per_anchor();
  const std::array<int, kNumLevels> head_in{c3, c4, c5};
  for (int l = 0; l < kNumLevels; ++l) {
    const std::string name = "p" + std::to_string(l + 3);
    heads_.emplace_back(hd.sub(name),
                        ConvShape::square(head_in[static_cast<std::size_t>(l)],
                                          kAnchorsPerLevel * no, 1),
                        true);
    // Objectness prior of ~2 objects per image, class prior 0.6 / K.
    T* b = heads_.back().bias.mutable_ptr();
    const double cells = std::pow(spec_.input_size / kStrides[static_cast<std::size_t>(l)], 2.0);
    for (int a = 0; a < kAnchorsPerLevel; ++a) {
      b[a * no + 4] += static_cast<T>(std::log(2.0 / cells));
      for (int k = 0; k < spec_.num_classes; ++k) {
        b[a * no + 5 + k] += static_cast<T>(std::log(0.6 / (spec_.num_classes - 0.99)));
      }
    }
    rec.note(store_, hd.name(name),
             "conv k1 " + dim(head_in[static_cast<std::size_t>(l)], kAnchorsPerLevel * no) +
                 " stride " + std::to_string(kStrides[static_cast<std::size_t>(l)]));
  }
}

template <typename T>
Tensor<T> Detector<T>::stage(int i, const Tensor<T>& x, const Mode& mode) {
  const auto k = static_cast<std::size_t>(i);
  if (spec_.variant == Variant::ghost) {
    return ghost_stage_[k].forward(ghost_down_[k].forward(x, mode), mode);
  }
  return conv_stage_[k].forward(conv_down_[k].forward(x, mode), mode);
}

template <typename T>
Tensor<T> Detector<T>::neck_attention(int i, const Tensor<T>& x, const Mode& mode) {
  if (!spec_.use_ca) return x;
  return ca_[static_cast<std::size_t>(i)].forward(x, mode);
}

template <typename T>
std::vector<Tensor<T>> Detector<T>::forward(const Tensor<T>& x, const Mode& mode) {
  const auto s = spec_.input_size;
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != s || x.dim(3) != s) {
    throw DimensionError("detector: expected input (N,3," + std::to_string(s) + "," +
                         std::to_string(s) + "), got " + shape_str(x.shape()));
  }
  auto up2 = [](const Tensor<T>& t) { return resize_nearest(t, 2 * t.dim(2), 2 * t.dim(3)); };
  Tensor<T> y = stem_.forward(x, mode);
  y = stage(0, y, mode);
  Tensor<T> p3 = stage(1, y, mode);
  Tensor<T> p4 = stage(2, p3, mode);
  Tensor<T> p5 = sppf_.forward(stage(3, p4, mode), mode);

  Tensor<T> l0 = lateral0_.forward(p5, mode);
  Tensor<T> n4 = neck_c3_[0].forward(neck_attention(0, concat<T>({up2(l0), p4}, 1), mode), mode);
  Tensor<T> l1 = lateral1_.forward(n4, mode);
  Tensor<T> out3 =
      neck_c3_[1].forward(neck_attention(1, concat<T>({up2(l1), p3}, 1), mode), mode);
  Tensor<T> out4 = neck_c3_[2].forward(
      neck_attention(2, concat<T>({down0_.forward(out3, mode), l1}, 1), mode), mode);
  Tensor<T> out5 = neck_c3_[3].forward(
      neck_attention(3, concat<T>({down1_.forward(out4, mode), l0}, 1), mode), mode);
  return {heads_[0].forward(out3), heads_[1].forward(out4), heads_[2].forward(out5)};
}

template <typename T>
std::string Detector<T>::describe() const {
  std::ostringstream os;
  os << "model variant=" << variant_name(spec_.variant) << " width=" << spec_.width_multiple
     << " depth=" << spec_.depth_multiple << " classes=" << spec_.num_classes
     << " input=" << spec_.input_size << " ca=" << (spec_.use_ca ? 1 : 0)
     << " scconv=" << (spec_.use_sc ? 1 : 0) << "\n";
  for (const auto& line : lines_) os << "  " << line << "\n";
  os << "total params=" << store_.count() << "\n";
  return os.str();
}

std::int64_t count_flops(const ModelSpec& spec, const Shape& input_shape) {
  Detector<float> model(spec, 0);
  NoGradGuard no_grad;
  FlopCounter counter;
  model.forward(Tensor<float>(input_shape), Mode::eval());
  return counter.flops();
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    return a.confidence > b.confidence;
  });
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    bool keep = true;
    for (const auto& k : kept) {
      if (k.class_id == d.class_id && k.image_id == d.image_id && iou(k.bbox, d.bbox) >= iou_thresh) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(d);
  }
  return kept;
}

template <typename T>
std::vector<std::vector<Detection>> decode_nms(const std::vector<Tensor<T>>& heads,
                                               const ModelSpec& spec, double conf_thresh,
                                               double iou_thresh, int max_det) {
  if (heads.size() != kNumLevels) throw DimensionError("decode: expected three head maps");
  const auto anchors = spec.resolved_anchors();
  const int no = spec.outputs_per_anchor();
  const auto n = heads[0].dim(0);
  const double size = spec.input_size;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<std::vector<Detection>> out(static_cast<std::size_t>(n));
  for (std::int64_t img = 0; img < n; ++img) {
    std::vector<Detection> cand;
    for (int l = 0; l < kNumLevels; ++l) {
      const auto& h = heads[static_cast<std::size_t>(l)];
      const auto gh = h.dim(2), gw = h.dim(3);
      if (h.dim(1) != kAnchorsPerLevel * no) throw DimensionError("decode: head channel mismatch");
      const double stride = kStrides[static_cast<std::size_t>(l)];
      const T* base = h.ptr() + img * h.dim(1) * gh * gw;
      for (int a = 0; a < kAnchorsPerLevel; ++a) {
        const Anchor& anc = anchors[static_cast<std::size_t>(l * kAnchorsPerLevel + a)];
        for (std::int64_t gy = 0; gy < gh; ++gy) {
          for (std::int64_t gx = 0; gx < gw; ++gx) {
            auto at = [&](int k) {
              return static_cast<double>(base[((a * no + k) * gh + gy) * gw + gx]);
            };
            const double obj = sig(at(4));
            if (!(obj > conf_thresh)) continue;
            int best = 0;
            double best_p = -1.0;
            for (int k = 0; k < spec.num_classes; ++k) {
              const double p = sig(at(5 + k));
              if (p > best_p) {
                best_p = p;
                best = k;
              }
            }
            const double conf = obj * best_p;
            if (!(conf > conf_thresh)) continue;
            const double cx = (2.0 * sig(at(0)) - 0.5 + gx) * stride;
            const double cy = (2.0 * sig(at(1)) - 0.5 + gy) * stride;
            const double bw = std::pow(2.0 * sig(at(2)), 2.0) * anc.w;
            const double bh = std::pow(2.0 * sig(at(3)), 2.0) * anc.h;
            BBox b = BBox::from_center(cx, cy, bw, bh);
            b.x1 = std::clamp(b.x1, 0.0, size);
            b.y1 = std::clamp(b.y1, 0.0, size);
            b.x2 = std::clamp(b.x2, 0.0, size);
            b.y2 = std::clamp(b.y2, 0.0, size);
            cand.push_back({b, best, conf, img});
          }
        }
      }
    }
    constexpr std::size_t kMaxCandidates = 3000;
    if (cand.size() > kMaxCandidates) {
      std::stable_sort(cand.begin(), cand.end(), [](const Detection& x, const Detection& y) {
        return x.confidence > y.confidence;
      });
      cand.resize(kMaxCandidates);
    }
    auto kept = nms(std::move(cand), iou_thresh);
    if (kept.size() > static_cast<std::size_t>(max_det)) kept.resize(static_cast<std::size_t>(max_det));
    out[static_cast<std::size_t>(img)] = std::move(kept);
  }
  return out;
}

template class Detector<float>;
template class Detector<double>;
template std::vector<std::vector<Detection>> decode_nms(const std::vector<Tensor<float>>&,
                                                        const ModelSpec&, double, double, int);
template std::vector<std::vector<Detection>> decode_nms(const std::vector<Tensor<double>>&,
                                                        const ModelSpec&, double, double, int);

}  // namespace byhd
