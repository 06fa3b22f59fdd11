#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "byhd/app/gradcheck.hpp"
#include "byhd/config.hpp"

namespace byhd::app {

enum ExitStatus : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitUsage = 2,
  kExitCheckFailed = 3,
};

/// Maps an escaped exception to its exit status: configuration, parse,
/// validation and container errors are usage errors (2), the rest runtime (1).
int exit_status_for(const std::exception& e);

struct TrainArgs {
  std::string config;  // empty = defaults
  std::string data;    // overrides paths.data when set
  std::string out;     // overrides paths.out when set
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> overrides;  // --set key=value
};

struct EvalArgs {
  std::string ckpt;
  std::string data;
  double conf = 0.001;
  double iou = 0.6;
  std::string curves_dir;  // empty = no curve files
};

struct ParamsArgs {
  std::string config;
  std::vector<std::pair<std::string, std::string>> overrides;
  bool compare = false;
};

struct FlatnessArgs {
  std::string ckpt;
  std::string data;
  std::string fixture;  // "quadratic" or "constant" instead of a checkpoint
  double rho = 0.01;
  std::uint64_t seed = 0;
  std::int64_t batch = 16;
};

struct GenSynthArgs {
  std::string out;
  std::int64_t count = 200;
  std::int64_t size = 64;
  std::uint64_t seed = 0;
};

// Each command writes human output to `out`, diagnostics to `err`, and
// returns an ExitStatus. No exception escapes.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_params(const ParamsArgs& args, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err);
int cmd_flatness(const FlatnessArgs& args, std::ostream& out, std::ostream& err);
int cmd_gen_synth(const GenSynthArgs& args, std::ostream& out, std::ostream& err);

/// Parameter and FLOP accounting behind cmd_params.
struct ParamReport {
  std::vector<std::pair<std::string, std::int64_t>> modules;
  std::int64_t total = 0;
  std::int64_t flops = 0;
};

ParamReport param_report(const RunConfig& cfg);

}  // namespace byhd::app
