#include "byhd/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "byhd/container.hpp"
#include "byhd/error.hpp"

namespace fs = std::filesystem;

namespace byhd {

namespace {

using Color = std::array<float, 3>;

class Canvas {
 public:
  Canvas(std::int64_t size, Color fill) : s_(size), img_(Shape{3, size, size}) {
    auto px = img_.mutable_data();
    for (int c = 0; c < 3; ++c) {
      std::fill(px.begin() + c * s_ * s_, px.begin() + (c + 1) * s_ * s_, fill[c]);
    }
  }

  void rect(double x1, double y1, double x2, double y2, const Color& col) {
    const auto ix1 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(x1)));
    const auto iy1 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(y1)));
    const auto ix2 = std::min<std::int64_t>(s_, static_cast<std::int64_t>(std::ceil(x2)));
    const auto iy2 = std::min<std::int64_t>(s_, static_cast<std::int64_t>(std::ceil(y2)));
    for (auto y = iy1; y < iy2; ++y) {
      for (auto x = ix1; x < ix2; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        if (px >= x1 && px < x2 && py >= y1 && py < y2) set(x, y, col);
      }
    }
  }

  void disc(double cx, double cy, double r, const Color& col) {
    const auto ix1 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cx - r)));
    const auto iy1 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cy - r)));
    const auto ix2 = std::min<std::int64_t>(s_, static_cast<std::int64_t>(std::ceil(cx + r)));
    const auto iy2 = std::min<std::int64_t>(s_, static_cast<std::int64_t>(std::ceil(cy + r)));
    for (auto y = iy1; y < iy2; ++y) {
      for (auto x = ix1; x < ix2; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r * r) set(x, y, col);
      }
    }
  }

  void noise(Rng& rng, double sigma) {
    for (auto& v : img_.mutable_data()) {
      v = static_cast<float>(std::clamp(v + sigma * rng.normal(), 0.0, 1.0));
    }
  }

  Tensor<float> take() { return img_; }

 private:
  void set(std::int64_t x, std::int64_t y, const Color& col) {
    auto px = img_.mutable_data();
    for (int c = 0; c < 3; ++c) px[(c * s_ + y) * s_ + x] = col[c];
  }

  std::int64_t s_;
  Tensor<float> img_;
};

Color random_color(Rng& rng, double lo, double hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

std::string stem(std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05lld", static_cast<long long>(i));
  return buf;
}

}  // namespace

Sample render_synth(const SynthOptions& o, std::int64_t index) {
  if (o.size < 16) throw ConfigError("gen_synth: image size must be >= 16");
  if (o.min_objects < 1 || o.max_objects < o.min_objects) {
    throw ConfigError("gen_synth: object count range must satisfy 1 <= min <= max");
  }
  Rng rng(mix_seed(o.seed, static_cast<std::uint64_t>(index)));
  const double S = static_cast<double>(o.size);
  Canvas canvas(o.size, random_color(rng, 0.25, 0.75));

  const auto clutter = rng.uniform_int(2, 5);
  for (std::int64_t k = 0; k < clutter; ++k) {
    const double w = rng.uniform(0.05, 0.3) * S, h = rng.uniform(0.05, 0.3) * S;
    const double x = rng.uniform(0.0, S - w), y = rng.uniform(0.0, S - h);
    canvas.rect(x, y, x + w, y + h, random_color(rng, 0.2, 0.8));
  }

  Sample s;
  const auto n = rng.uniform_int(o.min_objects, o.max_objects);
  for (std::int64_t k = 0; k < n; ++k) {
    const int cls = rng.bernoulli(o.helmet_fraction) ? kHelmet : kHead;
    // A few placement attempts keep objects from heavily overlapping.
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double r = rng.uniform(0.08, 0.18) * S;
      const double half_w = cls == kHelmet ? 1.3 * r : r;
      const double cx = rng.uniform(half_w, S - half_w);
      const double cy = rng.uniform(r, S - r);
      const BBox box = BBox::from_center(cx, cy, 2 * half_w, 2 * r);
      const bool clash = std::any_of(s.labels.begin(), s.labels.end(),
                                     [&](const GroundTruth& g) { return iou(g.bbox, box) > 0.1; });
      if (clash && attempt + 1 < 20) continue;
      if (clash) break;
      Color col = random_color(rng, 0.0, 1.0);
      col[static_cast<std::size_t>(rng.uniform_int(0, 2))] = rng.bernoulli(0.5) ? 0.05f : 0.95f;
      canvas.disc(cx, cy, r, col);
      if (cls == kHelmet) {
        const Color brim{1.0f - col[0], 1.0f - col[1], 1.0f - col[2]};
        canvas.rect(cx - 1.3 * r, cy + 0.2 * r, cx + 1.3 * r, cy + 0.55 * r, brim);
      }
      s.labels.push_back({box, cls, index});
      break;
    }
  }
  canvas.noise(rng, 0.03);
  s.image = canvas.take();
  return s;
}

std::vector<std::vector<GroundTruth>> gen_synth(const std::string& dir, const SynthOptions& o) {
  if (o.count < 1) throw ConfigError("gen_synth: n must be >= 1");
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  fs::create_directories(fs::path(dir) / "labels", ec);
  if (ec) throw IoError("gen_synth: cannot create " + dir + ": " + ec.message());
  std::vector<std::vector<GroundTruth>> all;
  for (std::int64_t i = 0; i < o.count; ++i) {
    Sample s = render_synth(o, i);
    Container c;
    c.set_meta("kind", "image");
    c.set_meta("size", std::to_string(o.size));
    c.add("image", s.image);
    c.save((fs::path(dir) / "images" / (stem(i) + ".bin")).string());
    const auto label_path = (fs::path(dir) / "labels" / (stem(i) + ".txt")).string();
    std::ofstream os(label_path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("gen_synth: cannot write " + label_path);
    os << format_labels(s.labels, static_cast<double>(o.size));
    if (!os) throw IoError("gen_synth: failed writing " + label_path);
    all.push_back(std::move(s.labels));
  }
  return all;
}

std::string format_labels(const std::vector<GroundTruth>& labels, double S) {
  std::string out;
  char buf[128];
  for (const auto& g : labels) {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", g.class_id, g.bbox.cx() / S,
                  g.bbox.cy() / S, g.bbox.width() / S, g.bbox.height() / S);
    out += buf;
  }
  return out;
}

std::vector<GroundTruth> parse_labels(const std::string& text, double S, int num_classes,
                                      const std::string& origin) {
  std::vector<GroundTruth> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    std::istringstream ls(line);
    long long cls = 0;
    double cx = 0, cy = 0, w = 0, h = 0;
    std::string extra;
    if (!(ls >> cls >> cx >> cy >> w >> h) || (ls >> extra)) {
      throw ParseError(where + ": expected \"class cx cy w h\", got \"" + line + "\"");
    }
    if (cls < 0 || cls >= num_classes) {
      throw ValidationError(where + ": class " + std::to_string(cls) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    for (const double v : {cx, cy, w, h}) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(where + ": coordinate " + std::to_string(v) + " outside [0, 1]");
      }
    }
    GroundTruth g;
    g.class_id = static_cast<int>(cls);
    g.bbox = BBox::from_center(cx * S, cy * S, w * S, h * S);
    out.push_back(g);
  }
  return out;
}

std::vector<GroundTruth> load_labels(const std::string& path, double S, int num_classes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open label file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_labels(ss.str(), S, num_classes, path);
}

std::vector<Sample> load_dataset(const std::string& dir, int num_classes) {
  const fs::path images = fs::path(dir) / "images";
  if (!fs::is_directory(images)) throw IoError("dataset: no images directory under " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("dataset: no images in " + images.string());
  std::vector<Sample> out;
  std::int64_t size = -1;
  for (const auto& f : files) {
    const Container c = Container::load(f.string());
    Sample s;
    s.image = c.get<float>("image");
    const auto& sh = s.image.shape();
    if (sh.size() != 3 || sh[0] != 3 || sh[1] != sh[2]) {
      throw FormatError("dataset: " + f.string() + " is not a square 3-channel image");
    }
    if (size >= 0 && sh[1] != size) throw FormatError("dataset: mixed image sizes in " + dir);
    size = sh[1];
    const auto label_path = fs::path(dir) / "labels" / (f.stem().string() + ".txt");
    s.labels = load_labels(label_path.string(), static_cast<double>(size), num_classes);
    for (auto& g : s.labels) g.image_id = static_cast<std::int64_t>(out.size());
    out.push_back(std::move(s));
  }
  return out;
}

Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("split: train fraction must be in (0, 1]");
  }
  auto order = batch_order(n, mix_seed(seed, 0x5b11), 0);
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(n * train_fraction)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

std::vector<std::size_t> batch_order(std::size_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

Sample augment(const Sample& s, const AugmentOptions& o, Rng& rng) {
  const bool flip = rng.bernoulli(o.flip_prob);
  const double scale = 1.0 + rng.uniform(-o.scale_jitter, o.scale_jitter);
  if (!o.enabled) return s;
  const auto S = s.image.dim(1);
  const double Sd = static_cast<double>(S), c = 0.5 * Sd;
  Sample out;
  out.image = Tensor<float>(Shape{3, S, S}, 0.5f);
  const auto src = s.image.data();
  auto dst = out.image.mutable_data();
  for (std::int64_t y = 0; y < S; ++y) {
    const double sy = c + (y + 0.5 - c) / scale;
    const auto iy = static_cast<std::int64_t>(std::floor(sy));
    if (iy < 0 || iy >= S) continue;
    for (std::int64_t x = 0; x < S; ++x) {
      double sx = c + (x + 0.5 - c) / scale;
      if (flip) sx = Sd - sx;
      const auto ix = static_cast<std::int64_t>(std::floor(sx));
      if (ix < 0 || ix >= S) continue;
      for (std::int64_t ch = 0; ch < 3; ++ch) {
        dst[(ch * S + y) * S + x] = src[(ch * S + iy) * S + ix];
      }
    }
  }
  for (const auto& g : s.labels) {
    double x1 = g.bbox.x1, x2 = g.bbox.x2;
    if (flip) {
      x1 = Sd - g.bbox.x2;
      x2 = Sd - g.bbox.x1;
    }
    auto map = [&](double v) { return std::clamp(c + (v - c) * scale, 0.0, Sd); };
    GroundTruth t = g;
    t.bbox = {map(x1), map(g.bbox.y1), map(x2), map(g.bbox.y2)};
    if (t.bbox.width() >= 2.0 && t.bbox.height() >= 2.0) out.labels.push_back(t);
  }
  return out;
}

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("make_batch: empty index list");
  const auto& first = samples.at(indices.front()).image.shape();
  const auto per = shape_numel(first);
  Batch b;
  b.images = Tensor<float>(Shape{static_cast<std::int64_t>(indices.size()), first[0], first[1],
                                 first[2]});
  auto dst = b.images.mutable_data();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Sample& s = samples.at(indices[k]);
    if (s.image.shape() != first) throw DimensionError("make_batch: image shapes differ");
    std::copy(s.image.data().begin(), s.image.data().end(),
              dst.begin() + static_cast<std::ptrdiff_t>(k) * per);
    for (GroundTruth g : s.labels) {
      g.image_id = static_cast<std::int64_t>(k);
      b.targets.push_back(g);
    }
  }
  return b;
}

Batch make_batch(const std::vector<Sample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch(samples, idx);
}

}  // namespace byhd
