#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "byhd/config.hpp"
#include "byhd/container.hpp"
#include "byhd/data.hpp"
#include "byhd/error.hpp"
#include "helpers.hpp"

using namespace byhd;

namespace {

template <typename E>
std::string thrown_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Synth, DeterministicPerIndexAndInBounds) {
  SynthOptions o;
  o.seed = 3;
  for (std::int64_t i = 0; i < 30; ++i) {
    const auto a = render_synth(o, i), b = render_synth(o, i);
    ASSERT_EQ(a.image.shape(), (Shape{3, 64, 64}));
    EXPECT_EQ(std::memcmp(a.image.ptr(), b.image.ptr(), sizeof(float) * a.image.numel()), 0);
    ASSERT_GE(a.labels.size(), 1u);
    ASSERT_LE(a.labels.size(), 4u);
    for (const auto& g : a.labels) {
      EXPECT_GE(g.bbox.x1, 0.0);
      EXPECT_GE(g.bbox.y1, 0.0);
      EXPECT_LE(g.bbox.x2, 64.0);
      EXPECT_LE(g.bbox.y2, 64.0);
      EXPECT_LT(g.bbox.x1, g.bbox.x2);
      EXPECT_TRUE(g.class_id == kHelmet || g.class_id == kHead);
    }
    for (float v : a.image.data()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  o.seed = 4;
  const auto c = render_synth(o, 0);
  SynthOptions o3;
  o3.seed = 3;
  const auto d = render_synth(o3, 0);
  EXPECT_NE(std::memcmp(c.image.ptr(), d.image.ptr(), sizeof(float) * c.image.numel()), 0);
}

TEST(Synth, BothClassesOccur) {
  SynthOptions o;
  int counts[2] = {0, 0};
  for (std::int64_t i = 0; i < 50; ++i)
    for (const auto& g : render_synth(o, i).labels) ++counts[g.class_id];
  EXPECT_GT(counts[0], 10);
  EXPECT_GT(counts[1], 10);
}

TEST(Synth, WrittenDatasetLoadsBack) {
  const auto dir = byhd::test::scratch_dir("synth");
  SynthOptions o;
  o.count = 6;
  o.seed = 8;
  const auto boxes = gen_synth(dir, o);
  ASSERT_EQ(boxes.size(), 6u);
  EXPECT_TRUE(std::filesystem::exists(dir + "/images/00000.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/labels/00005.txt"));
  const auto samples = load_dataset(dir, 2);
  ASSERT_EQ(samples.size(), 6u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto ref = render_synth(o, static_cast<std::int64_t>(i));
    EXPECT_EQ(std::memcmp(samples[i].image.ptr(), ref.image.ptr(), sizeof(float) * ref.image.numel()),
              0);
    ASSERT_EQ(samples[i].labels.size(), ref.labels.size());
    for (std::size_t k = 0; k < ref.labels.size(); ++k) {
      EXPECT_NEAR(samples[i].labels[k].bbox.x1, ref.labels[k].bbox.x1, 1e-3);
      EXPECT_NEAR(samples[i].labels[k].bbox.y2, ref.labels[k].bbox.y2, 1e-3);
      EXPECT_EQ(samples[i].labels[k].class_id, ref.labels[k].class_id);
      EXPECT_EQ(samples[i].labels[k].image_id, static_cast<std::int64_t>(i));
    }
  }
  EXPECT_THROW(load_dataset(dir + "/nope", 2), IoError);
}

TEST(Labels, ParseAndFormatRoundTrip) {
  const auto g = parse_labels("0 0.5 0.5 0.25 0.125\n\n1 0.1 0.9 0.2 0.2\n", 64, 2);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(g[0].bbox.x1, 24.0);
  EXPECT_DOUBLE_EQ(g[0].bbox.y2, 36.0);
  EXPECT_EQ(g[1].class_id, 1);
  const auto back = parse_labels(format_labels(g, 64), 64, 2);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(back[i].bbox.x1, g[i].bbox.x1, 1e-4);
    EXPECT_NEAR(back[i].bbox.y2, g[i].bbox.y2, 1e-4);
  }
}

TEST(Labels, ErrorsNameTheLine) {
  const auto parse = thrown_message<ParseError>(
      [] { parse_labels("0 0.5 0.5 0.1 0.1\n0 0.5 oops 0.1 0.1\n", 64, 2, "a.txt"); });
  EXPECT_NE(parse.find("a.txt:2"), std::string::npos) << parse;
  EXPECT_THROW(parse_labels("0 0.5 0.5 0.1\n", 64, 2), ParseError);
  EXPECT_THROW(parse_labels("0 0.5 0.5 0.1 0.1 7\n", 64, 2), ParseError);
  const auto cls = thrown_message<ValidationError>([] { parse_labels("\n2 0.5 0.5 0.1 0.1\n", 64, 2, "b"); });
  EXPECT_NE(cls.find("b:2"), std::string::npos) << cls;
  EXPECT_THROW(parse_labels("0 1.5 0.5 0.1 0.1\n", 64, 2), ValidationError);
}

TEST(Split, SizesDisjointDeterministic) {
  const auto s = split_indices(220, 0.9091, 5);
  EXPECT_EQ(s.train.size(), 200u);
  EXPECT_EQ(s.val.size(), 20u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  EXPECT_EQ(all.size(), 220u);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  const auto again = split_indices(220, 0.9091, 5);
  EXPECT_EQ(again.val, s.val);
  EXPECT_NE(split_indices(220, 0.9091, 6).val, s.val);
  EXPECT_THROW(split_indices(10, 0.0, 1), ConfigError);
}

TEST(BatchOrder, PermutationDependingOnSeedAndEpoch) {
  const auto a = batch_order(50, 1, 0);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_EQ(batch_order(50, 1, 0), a);
  EXPECT_NE(batch_order(50, 1, 1), a);
  EXPECT_NE(batch_order(50, 2, 0), a);
}

TEST(Augment, DisabledIsIdentityAndFlipMirrorsBoxes) {
  SynthOptions o;
  const auto s = render_synth(o, 2);
  Rng rng(1);
  AugmentOptions off;
  off.enabled = false;
  const auto same = augment(s, off, rng);
  EXPECT_EQ(std::memcmp(same.image.ptr(), s.image.ptr(), sizeof(float) * s.image.numel()), 0);

  AugmentOptions flip;
  flip.flip_prob = 1.0;
  flip.scale_jitter = 0.0;
  const auto f = augment(s, flip, rng);
  ASSERT_EQ(f.labels.size(), s.labels.size());
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    EXPECT_NEAR(f.labels[i].bbox.x1, 64 - s.labels[i].bbox.x2, 1e-9);
    EXPECT_NEAR(f.labels[i].bbox.y1, s.labels[i].bbox.y1, 1e-9);
  }
  for (std::int64_t y = 0; y < 64; ++y)
    for (std::int64_t x = 0; x < 64; ++x)
      EXPECT_EQ(f.image.at({1, y, x}), s.image.at({1, y, 63 - x}));
}

TEST(Augment, BoxesStayInsideImage) {
  SynthOptions o;
  Rng rng(2);
  AugmentOptions a;
  a.scale_jitter = 0.3;
  for (std::int64_t i = 0; i < 40; ++i) {
    for (const auto& g : augment(render_synth(o, i), a, rng).labels) {
      EXPECT_GE(g.bbox.x1, 0.0);
      EXPECT_LE(g.bbox.x2, 64.0);
      EXPECT_GE(g.bbox.width(), 2.0);
    }
  }
}

TEST(Batch, StacksImagesAndRenumbersTargets) {
  SynthOptions o;
  std::vector<Sample> s{render_synth(o, 0), render_synth(o, 1), render_synth(o, 2)};
  const auto b = make_batch(s, {2, 0});
  EXPECT_EQ(b.images.shape(), (Shape{2, 3, 64, 64}));
  EXPECT_EQ(b.targets.size(), s[2].labels.size() + s[0].labels.size());
  EXPECT_EQ(b.targets.front().image_id, 0);
  EXPECT_EQ(b.targets.back().image_id, 1);
  EXPECT_EQ(b.images.data()[0], s[2].image.data()[0]);
  EXPECT_THROW(make_batch(s, {}), ContractError);
}

TEST(Container, RoundTripIsBitwise) {
  Rng rng(3);
  Container c;
  c.set_meta("cfg.lr", "0.1");
  c.set_meta("step", "42");
  auto f = byhd::test::randn(rng, {2, 3, 4});
  auto d = byhd::test::randn<double>(rng, {5});
  c.add("f", f);
  c.add("d", d);
  const auto path = byhd::test::scratch_dir("container") + "/c.bin";
  c.save(path);
  const auto back = Container::load(path);
  EXPECT_EQ(back.meta("cfg.lr"), "0.1");
  EXPECT_EQ(back.meta("missing"), "");
  EXPECT_FALSE(back.has_meta("missing"));
  const auto f2 = back.get<float>("f");
  const auto d2 = back.get<double>("d");
  EXPECT_EQ(f2.shape(), f.shape());
  EXPECT_EQ(std::memcmp(f2.ptr(), f.ptr(), sizeof(float) * f.numel()), 0);
  EXPECT_EQ(std::memcmp(d2.ptr(), d.ptr(), sizeof(double) * d.numel()), 0);
  EXPECT_EQ(back.serialize(), c.serialize());
  EXPECT_THROW(back.get<double>("f"), FormatError);
  EXPECT_THROW(back.get<float>("nope"), ContractError);
}

TEST(Container, DamagedBytesAreRejected) {
  Container c;
  c.add("t", Tensor<float>({8}, 1.0f));
  auto bytes = c.serialize();
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(Container::parse(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(Container::parse(bad_version), FormatError);
  for (std::size_t cut : {std::size_t{6}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(Container::parse(truncated), CorruptionError) << cut;
  }
  EXPECT_THROW(Container::load(byhd::test::scratch_dir("container2") + "/none.bin"), IoError);
}

TEST(Checkpoint, StoreRoundTripAndMismatch) {
  Rng rng(4);
  ParamStore<float> a, b, c;
  a.add("w", byhd::test::randn(rng, {3, 3}));
  a.add_buffer("m", byhd::test::randn(rng, {3}));
  b.add("w", Tensor<float>({3, 3}));
  b.add_buffer("m", Tensor<float>({3}));
  c.add("w", Tensor<float>({2, 3}));
  const auto path = byhd::test::scratch_dir("ckpt") + "/a.ckpt";
  checkpoint_save(path, a, {{"step", "3"}});
  const auto ck = Container::load(path);
  checkpoint_restore(ck, b);
  EXPECT_EQ(std::memcmp(a.get("w").ptr(), b.get("w").ptr(), 9 * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(a.get("m").ptr(), b.get("m").ptr(), 3 * sizeof(float)), 0);
  EXPECT_THROW(checkpoint_restore(ck, c), ContractError);
}

TEST(Config, ParseOverridesAndRoundTrip) {
  const auto cfg = parse_config(
      "# comment\n[model]\nwidth_multiple = 0.5\nuse_ca = false\n[optimizer]\noptimizer = gam\n"
      "lr = 0.2 ; trailing\n[train]\nbatch_size = 4\n");
  EXPECT_EQ(cfg.width_multiple, 0.5);
  EXPECT_FALSE(cfg.use_ca);
  EXPECT_EQ(cfg.optimizer, OptimizerKind::gam);
  EXPECT_EQ(cfg.lr, 0.2);
  EXPECT_EQ(cfg.batch_size, 4);
  const auto again = parse_config(config_to_text(cfg));
  EXPECT_EQ(config_to_text(again), config_to_text(cfg));
  RunConfig o = cfg;
  set_config_value(o, "lr", "0.05");
  EXPECT_EQ(o.lr, 0.05);
  EXPECT_THROW(set_config_value(o, "learning_rate", "1"), ConfigError);
}

TEST(Config, ErrorsNameLineAndSuggest) {
  const auto unknown =
      thrown_message<ConfigError>([] { parse_config("[optimizer]\nmomentun = 0.9\n", "run.ini"); });
  EXPECT_NE(unknown.find("run.ini:2"), std::string::npos) << unknown;
  EXPECT_NE(unknown.find("momentum"), std::string::npos) << unknown;
  EXPECT_THROW(parse_config("[train]\nlr = 0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\nbatch_size = many\n"), ConfigError);
  EXPECT_THROW(parse_config("[nowhere]\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\noptimizer = adam\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\nlr = -1\n").validate(), ConfigError);
}

TEST(Config, EveryKeyDocumented) {
  const auto help = config_key_help();
  for (const auto& k : config_keys()) EXPECT_NE(help.find(k), std::string::npos) << k;
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
}
