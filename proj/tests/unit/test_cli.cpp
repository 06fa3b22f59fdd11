#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "byhd/app/commands.hpp"
#include "byhd/error.hpp"
#include "byhd/metrics.hpp"
#include "helpers.hpp"

using namespace byhd;
using namespace byhd::app;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Run run_cli(const std::string& args) {
  static int counter = 0;
  const auto dir = fs::path(BYHD_TEST_TMP) / "cli_runs";
  fs::create_directories(dir);
  const auto base = (dir / std::to_string(counter++)).string();
  const std::string cmd =
      std::string(BYHD_CLI_PATH) + " " + args + " > " + base + ".out 2> " + base + ".err";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(base + ".out");
  r.err = slurp(base + ".err");
  return r;
}

double number_after(const std::string& text, const std::string& key) {
  std::smatch m;
  const std::regex re(key + "=([-+0-9.eE]+)");
  if (!std::regex_search(text, m, re)) return std::nan("");
  return std::stod(m[1]);
}

/// A tiny generated dataset shared by the tests below.
const std::string& tiny_data() {
  static const std::string dir = [] {
    const auto d = byhd::test::scratch_dir("cli_data");
    GenSynthArgs g;
    g.out = d;
    g.count = 24;
    g.seed = 2;
    std::ostringstream out, err;
    if (cmd_gen_synth(g, out, err) != kExitOk) throw std::runtime_error(err.str());
    return d;
  }();
  return dir;
}

TrainArgs tiny_train(const std::string& out) {
  TrainArgs a;
  a.data = tiny_data();
  a.out = out;
  a.has_seed = true;
  a.seed = 4;
  a.overrides = {{"epochs", "2"},     {"batch_size", "4"},     {"max_steps", "8"},
                 {"lr", "0.05"},      {"width_multiple", "0.125"}, {"split", "0.75"}};
  return a;
}

}  // namespace

TEST(ExitStatus, MapsErrorFamilies) {
  EXPECT_EQ(exit_status_for(ConfigError("x")), kExitUsage);
  EXPECT_EQ(exit_status_for(ParseError("x")), kExitUsage);
  EXPECT_EQ(exit_status_for(ValidationError("x")), kExitUsage);
  EXPECT_EQ(exit_status_for(FormatError("x")), kExitUsage);
  EXPECT_EQ(exit_status_for(CorruptionError("x")), kExitUsage);
  EXPECT_EQ(exit_status_for(NumericError("x")), kExitRuntime);
  EXPECT_EQ(exit_status_for(std::runtime_error("x")), kExitRuntime);
}

TEST(Params, SingleConvHandCount) {
  ParamsArgs a;
  a.overrides = {{"variant", "single-conv"}};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_params(a, out, err), kExitOk) << err.str();
  EXPECT_EQ(number_after(out.str(), "total params"), 73984);
}

TEST(Params, CompareReportsReduction) {
  ParamsArgs a;
  a.compare = true;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_params(a, out, err), kExitOk) << err.str();
  const auto text = out.str();
  const double base = number_after(text, "baseline params");
  const double ghost = number_after(text, "ghost params");
  EXPECT_LT(ghost, base);
  EXPECT_GE(number_after(text, "reduction params"), 25.0);
  EXPECT_GE(number_after(text, "% flops"), 25.0) << text;
}

TEST(Params, ModuleCountsSumToTotal) {
  const auto r = param_report(RunConfig{});
  std::int64_t sum = 0;
  for (const auto& [name, n] : r.modules) sum += n;
  EXPECT_EQ(sum, r.total);
  EXPECT_GT(r.flops, 0);
}

TEST(Flatness, QuadraticAndConstantFixtures) {
  FlatnessArgs a;
  a.fixture = "quadratic";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_flatness(a, out, err), kExitOk) << err.str();
  EXPECT_NEAR(number_after(out.str(), "lambda_max_est"), 4.0, 0.8);
  a.fixture = "constant";
  std::ostringstream out2;
  ASSERT_EQ(cmd_flatness(a, out2, err), kExitOk);
  EXPECT_EQ(number_after(out2.str(), "r1"), 0.0);
  a.fixture = "bogus";
  EXPECT_EQ(cmd_flatness(a, out2, err), kExitUsage);
}

TEST(Gradcheck, CleanScopePassesAndFaultFails) {
  GradcheckOptions o;
  o.scope = GradScope::primitives;
  o.only = "conv2d";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_gradcheck(o, out, err), kExitOk) << out.str() << err.str();
  o.fault = "conv2d";
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_gradcheck(o, out2, err2), kExitCheckFailed);
  EXPECT_NE(err2.str().find("conv2d"), std::string::npos) << err2.str();
}

TEST(Train, SameSeedByteIdenticalLogsAndCheckpoints) {
  const auto a = byhd::test::scratch_dir("train_a"), b = byhd::test::scratch_dir("train_b");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(tiny_train(a), out, err), kExitOk) << err.str();
  ASSERT_EQ(cmd_train(tiny_train(b), out, err), kExitOk) << err.str();
  const auto log = slurp(a + "/metrics.log");
  EXPECT_FALSE(log.empty());
  EXPECT_EQ(log, slurp(b + "/metrics.log"));
  EXPECT_EQ(slurp(a + "/last.ckpt"), slurp(b + "/last.ckpt"));
  EXPECT_NE(log.find("epoch=2"), std::string::npos) << log;
}

TEST(Eval, CurveFilesIntegrateToPrintedAp) {
  const auto run = byhd::test::scratch_dir("train_eval");
  std::ostringstream tout, terr;
  ASSERT_EQ(cmd_train(tiny_train(run), tout, terr), kExitOk) << terr.str();
  EvalArgs e;
  e.ckpt = run + "/last.ckpt";
  e.data = tiny_data();
  e.curves_dir = run + "/curves";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_eval(e, out, err), kExitOk) << err.str();
  const auto text = out.str();
  EXPECT_EQ(number_after(text, "images"), 24);
  for (int cls = 0; cls < 2; ++cls) {
    const double printed = number_after(text, "class " + std::to_string(cls) + " ap50");
    const auto curve = read_curve(run + "/curves/class" + std::to_string(cls) + "_precision_recall.csv");
    EXPECT_NEAR(pr_area(curve), printed, 5e-5) << text;
  }
}

TEST(Subprocess, ExitCodes) {
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("params --set momentun=0.9").code, 2);

  const auto r = run_cli("params --set momentun=0.9");
  EXPECT_NE(r.err.find("momentum"), std::string::npos) << r.err;

  const auto cfg = byhd::test::scratch_dir("cli_cfg") + "/bad.ini";
  std::ofstream(cfg) << "[train]\nbatch_size = lots\n";
  const auto bad = run_cli("train --config " + cfg);
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("bad.ini:2"), std::string::npos) << bad.err;

  EXPECT_EQ(run_cli("gradcheck --scope primitives --only add").code, 0);
  const auto fault = run_cli("gradcheck --scope primitives --only add --inject-fault add");
  EXPECT_EQ(fault.code, 3);
  EXPECT_NE(fault.err.find("add"), std::string::npos);
  EXPECT_EQ(run_cli("gradcheck --scope everything").code, 2);

  EXPECT_EQ(run_cli("flatness --fixture quadratic").code, 0);
  EXPECT_EQ(run_cli("eval --ckpt /nonexistent/x.ckpt --data " + tiny_data()).code, 1);
}

TEST(Subprocess, CorruptCheckpointIsUsageError) {
  const auto run = byhd::test::scratch_dir("train_corrupt");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(tiny_train(run), out, err), kExitOk) << err.str();
  const auto bytes = slurp(run + "/last.ckpt");
  std::ofstream(run + "/cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  const auto r = run_cli("eval --ckpt " + run + "/cut.ckpt --data " + tiny_data());
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("truncated"), std::string::npos) << r.err;
}

TEST(Subprocess, GenSynthThenTrainEndToEnd) {
  const auto dir = byhd::test::scratch_dir("cli_e2e");
  const auto g = run_cli("gen-synth --out " + dir + "/data --count 12 --seed 3");
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_NE(g.out.find("wrote 12 images"), std::string::npos);
  const auto t = run_cli("train --data " + dir + "/data --out " + dir +
                         "/run --seed 1 --set max_steps=2 --set batch_size=4 --set epochs=1 "
                         "--set width_multiple=0.125 --set split=0.75");
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(dir + "/run/best.ckpt"));
  EXPECT_TRUE(fs::exists(dir + "/run/metrics.log"));
}
