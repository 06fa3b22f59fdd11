#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "byhd/detector.hpp"
#include "byhd/optim.hpp"

namespace byhd {

enum class OptimizerKind { sgd, gam };

struct RunConfig {
  // [model]
  std::string variant = "ghost";  // ghost | conv | single-conv
  double width_multiple = 0.25;
  double depth_multiple = 0.33;
  int num_classes = 2;
  std::int64_t input_size = 64;
  bool use_ca = true;
  bool use_sc = true;
  bool use_dfc = true;
  std::int64_t probe_c_in = 64;  // single-conv variant only
  std::int64_t probe_c_out = 128;
  std::int64_t probe_kernel = 3;

  // [optimizer]
  OptimizerKind optimizer = OptimizerKind::sgd;
  double lr = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;
  double rho = 0.1;
  double alpha = 0.5;
  double xi = 1e-12;
  double fd_step = 1e-3;
  Schedule schedule = Schedule::constant;
  std::int64_t warmup_steps = 0;  // linear lr ramp from 0

  // [train]
  std::int64_t epochs = 10;
  std::int64_t batch_size = 16;
  std::int64_t max_steps = 0;  // 0 = no cap
  std::uint64_t seed = 0;
  double split = 0.9;
  bool augment = true;
  double conf_thresh = 0.001;
  double nms_iou = 0.6;

  // [paths]
  std::string data = "data";
  std::string out = "runs";

  /// Model spec for the ghost/conv variants. Throws ConfigError for
  /// single-conv.
  ModelSpec model_spec() const;
  SgdConfig sgd_config() const;
  GamConfig gam_config() const;

  void validate() const;
};

/// INI-style text: "[section]" headers and "key = value" lines; '#' and ';'
/// start comments. Keys before any header are looked up in every section.
/// Unknown keys, misplaced keys and type mismatches throw ConfigError
/// naming the line.
RunConfig parse_config(const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::string& path);

/// Sets one key from its text form, as a command-line override.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Every effective value, in canonical file form.
std::string config_to_text(const RunConfig& cfg);

/// One line per key: section, name, type, default and description.
std::string config_key_help();

std::vector<std::string> config_keys();

std::size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace byhd
