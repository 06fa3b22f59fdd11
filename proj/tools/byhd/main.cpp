#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "byhd/app/commands.hpp"
#include "byhd/config.hpp"

using namespace byhd::app;

namespace {

std::vector<std::pair<std::string, std::string>> split_sets(const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"byhd: ghost-backbone helmet detector laboratory"};
  app.require_subcommand(1);
  app.footer(
      "Precedence: command-line flags > --set key=value > config file > defaults.\n\n"
      "Config keys ([section] key  type  default  description):\n" +
      byhd::config_key_help());

  TrainArgs train;
  std::vector<std::string> train_sets;
  auto* c_train = app.add_subcommand("train", "train a detector, writing metrics.log and checkpoints");
  c_train->add_option("--config", train.config, "config file");
  c_train->add_option("--data", train.data, "dataset directory (overrides paths.data)");
  c_train->add_option("--out", train.out, "output directory (overrides paths.out)");
  auto* seed_opt = c_train->add_option("--seed", train.seed, "seed (overrides train.seed)");
  c_train->add_option("--set", train_sets, "override one config key, key=value");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
  c_eval->add_option("--ckpt", eval.ckpt, "checkpoint file")->required();
  c_eval->add_option("--data", eval.data, "dataset directory")->required();
  c_eval->add_option("--conf", eval.conf, "confidence threshold")->capture_default_str();
  c_eval->add_option("--iou", eval.iou, "NMS IoU threshold")->capture_default_str();
  c_eval->add_option("--curves", eval.curves_dir, "write per-class confidence curves here");

  ParamsArgs params;
  std::vector<std::string> params_sets;
  auto* c_params = app.add_subcommand("params", "parameter and FLOP counts");
  c_params->add_option("--config", params.config, "config file");
  c_params->add_option("--set", params_sets, "override one config key, key=value");
  c_params->add_flag("--compare", params.compare, "also build the other variant and report the reduction");

  GradcheckOptions grad;
  std::string scope = "primitives";
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  c_grad->add_option("--scope", scope, "primitives | blocks | model")
      ->check(CLI::IsMember({"primitives", "blocks", "model"}))
      ->capture_default_str();
  c_grad->add_option("--cases", grad.cases, "random shapes per check")->capture_default_str();
  c_grad->add_option("--seed", grad.seed, "seed")->capture_default_str();
  c_grad->add_option("--only", grad.only, "run a single named check");
  c_grad->add_option("--inject-fault", grad.fault, "corrupt one check's gradient")->group("");

  FlatnessArgs flat;
  auto* c_flat = app.add_subcommand("flatness", "first-order flatness and Hessian eigenvalue estimate");
  c_flat->add_option("--ckpt", flat.ckpt, "checkpoint file");
  c_flat->add_option("--data", flat.data, "dataset directory");
  c_flat->add_option("--rho", flat.rho, "perturbation radius")->capture_default_str();
  c_flat->add_option("--seed", flat.seed, "batch and fallback-direction seed")->capture_default_str();
  c_flat->add_option("--batch", flat.batch, "images in the fixed batch")->capture_default_str();
  c_flat->add_option("--fixture", flat.fixture, "quadratic | constant instead of a checkpoint");

  GenSynthArgs gen;
  auto* c_gen = app.add_subcommand("gen-synth", "write a synthetic helmet/head dataset");
  c_gen->add_option("--out", gen.out, "dataset directory")->required();
  c_gen->add_option("--count", gen.count, "images")->capture_default_str();
  c_gen->add_option("--size", gen.size, "image side in pixels")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
    train.overrides = split_sets(train_sets);
    params.overrides = split_sets(params_sets);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  train.has_seed = seed_opt->count() > 0;

  if (*c_train) return cmd_train(train, std::cout, std::cerr);
  if (*c_eval) return cmd_eval(eval, std::cout, std::cerr);
  if (*c_params) return cmd_params(params, std::cout, std::cerr);
  if (*c_grad) {
    grad.scope = scope == "blocks" ? GradScope::blocks
                 : scope == "model" ? GradScope::model
                                    : GradScope::primitives;
    return cmd_gradcheck(grad, std::cout, std::cerr);
  }
  if (*c_flat) return cmd_flatness(flat, std::cout, std::cerr);
  if (*c_gen) return cmd_gen_synth(gen, std::cout, std::cerr);
  return kExitUsage;
}
