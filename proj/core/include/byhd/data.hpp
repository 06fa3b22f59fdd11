#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "byhd/box.hpp"
#include "byhd/rng.hpp"
#include "byhd/tensor.hpp"

namespace byhd {

inline constexpr int kHelmet = 0;
inline constexpr int kHead = 1;

struct Sample {
  Tensor<float> image;  // (3, S, S), values in [0, 1]
  std::vector<GroundTruth> labels;
};

struct SynthOptions {
  std::int64_t count = 200;
  std::int64_t size = 64;
  std::uint64_t seed = 0;
  double helmet_fraction = 0.5;
  int min_objects = 1;
  int max_objects = 4;
};

/// Renders sample `index` of the synthetic set. Depends only on
/// (options.seed, index, options.size).
Sample render_synth(const SynthOptions& options, std::int64_t index);

/// Writes images/NNNNN.bin (tensor container, tensor "image") and
/// labels/NNNNN.txt under `dir`. Returns the in-memory boxes in pixels.
std::vector<std::vector<GroundTruth>> gen_synth(const std::string& dir,
                                                const SynthOptions& options);

/// Lines "class cx cy w h" with normalized coordinates. Blank lines are
/// skipped. Malformed lines throw ParseError naming the line number; class
/// ids >= num_classes or coordinates outside [0, 1] throw ValidationError.
std::vector<GroundTruth> parse_labels(const std::string& text, double image_size,
                                      int num_classes, const std::string& origin = "labels");
std::vector<GroundTruth> load_labels(const std::string& path, double image_size, int num_classes);

std::string format_labels(const std::vector<GroundTruth>& labels, double image_size);

/// Every image under dir/images with its label file, in file-name order.
std::vector<Sample> load_dataset(const std::string& dir, int num_classes);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Seeded shuffle of [0, n), the first round(n * train_fraction) going to
/// train. Each part is returned sorted.
Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

/// Permutation of [0, n) that depends only on (seed, epoch).
std::vector<std::size_t> batch_order(std::size_t n, std::uint64_t seed, std::int64_t epoch);

struct AugmentOptions {
  bool enabled = true;
  double flip_prob = 0.5;
  double scale_jitter = 0.1;  // scale drawn from [1 - j, 1 + j]
};

/// Horizontal flip and centered scale jitter. Boxes follow the image and
/// are clipped; boxes left narrower than 2 px are dropped.
Sample augment(const Sample& s, const AugmentOptions& options, Rng& rng);

struct Batch {
  Tensor<float> images;              // (B, 3, S, S)
  std::vector<GroundTruth> targets;  // image_id = position in the batch
};

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);
Batch make_batch(const std::vector<Sample>& samples);

}  // namespace byhd
