// Acceptance checks, one PASS/FAIL line each. Arguments select criteria by
// number; no arguments runs all of them. Exit status is 0 only when every
// selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "byhd/app/commands.hpp"
#include "byhd/app/gradcheck.hpp"
#include "byhd/app/trainer.hpp"
#include "byhd/attention.hpp"
#include "byhd/container.hpp"
#include "byhd/error.hpp"
#include "byhd/metrics.hpp"
#include "byhd/optim.hpp"
#include "common/block_checks.hpp"
#include "common/oracles.hpp"

using namespace byhd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string scratch(const std::string& name) {
  const auto dir = fs::path(BYHD_TEST_TMP) / "acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

RunConfig desk_config() { return load_config(std::string(BYHD_SOURCE_DIR) + "/configs/desk.ini"); }

std::vector<Sample> desk_samples() {
  SynthOptions o;
  o.count = 220;
  o.size = 64;
  o.seed = 1;
  std::vector<Sample> s;
  for (std::int64_t i = 0; i < o.count; ++i) {
    s.push_back(render_synth(o, i));
    for (auto& g : s.back().labels) g.image_id = i;
  }
  return s;
}

// 1 ---------------------------------------------------------------------------

Outcome param_flop_reduction() {
  RunConfig g;
  RunConfig c = g;
  c.variant = "conv";
  const auto rg = app::param_report(g), rc = app::param_report(c);
  const double dp = 1.0 - double(rg.total) / double(rc.total);
  const double df = 1.0 - double(rg.flops) / double(rc.flops);
  return {dp >= 0.25 && df >= 0.25,
          fmt("params %.0f vs %.0f (-%.1f%%), ", double(rg.total), double(rc.total), 100 * dp) +
              fmt("flops %.0f vs %.0f (-%.1f%%)", double(rg.flops), double(rc.flops), 100 * df)};
}

// 2 ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const std::set<std::string> required{"ghost", "dfc", "ca", "scconv", "sppf_sc", "bottleneck",
                                       "head"};
  int checks = 0, failed = 0;
  double worst32 = 0, worst64 = 0;
  std::set<std::string> seen;
  std::string failures;
  for (auto scope : {app::GradScope::primitives, app::GradScope::blocks}) {
    app::GradcheckOptions o;
    o.scope = scope;
    o.cases = 5;
    for (const auto& r : app::run_gradcheck(o)) {
      ++checks;
      seen.insert(r.name);
      (r.dtype == "f32" ? worst32 : worst64) = std::max(r.dtype == "f32" ? worst32 : worst64, r.worst);
      if (!r.pass() || r.cases < 5) {
        ++failed;
        failures += " " + r.name + "/" + r.dtype;
      }
    }
  }
  bool covered = true;
  for (const auto& name : required) covered &= seen.count(name) == 1;
  return {failed == 0 && covered,
          fmt("%.0f checks, %.0f failed, worst f32 %.2e (tol 1e-3), worst f64 %.2e (tol 1e-6)",
              checks, failed, worst32, worst64) +
              (covered ? "" : ", missing a required block") + failures};
}

// 3 ---------------------------------------------------------------------------

Outcome closed_form_exactness() {
  struct EmbedCase {
    std::int64_t h, w;
    std::vector<double> x, zh, zw;
  };
  const std::vector<EmbedCase> cases{
      {2, 2, {1, 2, 3, 4}, {1.5, 3.5}, {2, 3}},
      {2, 2, {0, 0, 0, 0}, {0, 0}, {0, 0}},
      {2, 2, {-1, 1, 2, 6}, {0, 4}, {0.5, 3.5}},
      {2, 2, {5, 5, 5, 5}, {5, 5}, {5, 5}},
      {3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9}, {2, 5, 8}, {4, 5, 6}},
      {3, 3, {3, 0, 0, 0, 3, 0, 0, 0, 3}, {1, 1, 1}, {1, 1, 1}},
      {3, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3}, {2, 2, 2}, {1, 2, 3}},
      {3, 3, {-3, 0, 3, 6, 6, 6, 0, 0, -9}, {0, 6, -3}, {1, 2, 0}},
  };
  int embed_bad = 0;
  for (const auto& c : cases) {
    const auto e = ca_embed(Tensor<double>({1, 1, c.h, c.w}, c.x));
    embed_bad += std::vector<double>(e.z_h.data().begin(), e.z_h.data().end()) != c.zh;
    embed_bad += std::vector<double>(e.z_w.data().begin(), e.z_w.data().end()) != c.zw;
  }
  double dfc_worst = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    dfc_worst = std::max(dfc_worst, oracle::dfc_dense_max_error(seed));
  int formula_bad = 0;
  for (const auto& c : oracle::count_formula_cases()) {
    const auto p = param_count_formula(c.c, c.c_prime, c.c_mid, c.k);
    formula_bad += p.p_conv != c.p_conv || p.p_ghost != c.p_ghost;
  }
  return {embed_bad == 0 && dfc_worst <= 1e-5 && formula_bad == 0,
          fmt("ca_embed %.0f/%.0f exact, dfc dense-oracle max err %.2e (tol 1e-5), ",
              double(2 * cases.size() - embed_bad), double(2 * cases.size()), dfc_worst) +
              fmt("count formula %.0f/10 tuples", 10.0 - formula_bad)};
}

// 4 ---------------------------------------------------------------------------

Outcome gam_correctness() {
  GamConfig cfg;
  cfg.base.lr = 0.1;
  cfg.rho = 0.1;
  cfg.alpha = 0.5;
  cfg.xi = 1e-12;
  int calls = 0;
  GradFn quad = [&](const std::vector<double>& t, std::vector<double>& g) {
    ++calls;
    g = {4.0 * t[0]};
    return 2.0 * t[0] * t[0];
  };
  OptimizerState st;
  std::vector<double> theta{1.0};
  gam_step(cfg, st, theta, quad);
  const double err = std::abs(theta[0] - 0.58);
  const bool cost_ok = calls == 5 && st.grad_evals == 5;

  // alpha = 0 against sgd_step on a small nonlinear model, several steps.
  auto build = [](ParamStore<float>& s) {
    Rng rng(11);
    Builder<float> b(s, rng);
    b.uniform("w1", {6, 4}, 0.5);
    b.uniform("w2", {6}, 0.5);
  };
  ParamStore<float> a, b;
  build(a);
  build(b);
  auto loss_of = [](ParamStore<float>& s) {
    return [&s] {
      const auto scaled = mul(atan(s.get("w1")), expand(reshape(s.get("w2"), {6, 1}), {6, 4}));
      return sum(square(add_scalar(scaled, -0.3f)));
    };
  };
  GamConfig zero = cfg;
  zero.alpha = 0;
  zero.base.momentum = 0.9;
  zero.base.weight_decay = 1e-3;
  OptimizerState sa, sb;
  for (int step = 0; step < 5; ++step) {
    gam_step(zero, sa, a, LossFn<float>(loss_of(a)));
    backward(loss_of(b)());
    sgd_step(zero.base, sb, b);
  }
  bool identical = true;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    const auto& ta = a.params()[i].second;
    const auto& tb = b.params()[i].second;
    identical &= std::memcmp(ta.ptr(), tb.ptr(), sizeof(float) * ta.numel()) == 0;
  }
  return {err <= 1e-4 && identical && cost_ok,
          fmt("theta 1 -> %.6f (|err| %.1e, tol 1e-4), ", theta[0], err) +
              (identical ? "alpha=0 bit-identical to sgd_step, " : "alpha=0 DIFFERS from sgd_step, ") +
              fmt("%.0f gradient evaluations per step", calls)};
}

// 5 ---------------------------------------------------------------------------

Outcome hvp_accuracy() {
  Rng rng(5);
  double worst = 0;
  const std::size_t n = 10;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> m(n, std::vector<double>(n)), a(n, std::vector<double>(n, 0.0));
    for (auto& row : m)
      for (auto& v : row) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) a[i][j] += m[k][i] * m[k][j];
    GradFn fn = [&](const std::vector<double>& t, std::vector<double>& g) {
      g.assign(n, 0.0);
      double l = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[i] += a[i][j] * t[j];
        l += 0.5 * t[i] * g[i];
      }
      return l;
    };
    std::vector<double> theta(n), v(n), want(n, 0.0), diff(n);
    for (auto& t : theta) t = rng.normal();
    for (auto& x : v) x = rng.normal();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) want[i] += a[i][j] * v[j];
    const auto got = hvp(fn, theta, v, 1e-3);
    for (std::size_t i = 0; i < n; ++i) diff[i] = got[i] - want[i];
    worst = std::max(worst, l2_norm(diff) / l2_norm(want));
  }
  return {worst <= 1e-3, fmt("100 directions, worst relative error %.2e (tol 1e-3)", worst)};
}

// 6 ---------------------------------------------------------------------------

Outcome flat_minimum_selection() {
  GradFn fn = [](const std::vector<double>& t, std::vector<double>& g) {
    g = {oracle::TwoWell::grad(t[0])};
    return oracle::TwoWell::loss(t[0]);
  };
  GamConfig cfg;
  // Near the sharp well's stability edge (100 lr = 1.9): plain steps still
  // settle there, the gradient-norm term tips it over.
  cfg.base.lr = 0.019;
  cfg.rho = 0.02;
  cfg.alpha = 0.5;
  int sgd_flat = 0, gam_flat = 0;
  for (double start : oracle::TwoWell::grid()) {
    std::vector<double> a{start}, b{start};
    OptimizerState sa, sb;
    for (int step = 0; step < 500; ++step) {
      std::vector<double> g;
      fn(a, g);
      apply_update(cfg.base, sa, a, g);
      gam_step(cfg, sb, b, fn);
    }
    sgd_flat += oracle::TwoWell::in_flat_basin(a[0]);
    gam_flat += oracle::TwoWell::in_flat_basin(b[0]);
  }
  return {gam_flat > sgd_flat,
          fmt("flat basin from %.0f/21 starts with GAM vs %.0f/21 with SGD (lr %.4f, 500 steps)",
              gam_flat, sgd_flat, cfg.base.lr)};
}

// 7 ---------------------------------------------------------------------------

Outcome map_oracle_equivalence() {
  Rng rng(7);
  int mismatches = 0, ap_checks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GroundTruth> gts;
    std::vector<Detection> dets;
    const auto n_gt = rng.uniform_int(1, 20);
    for (std::int64_t i = 0; i < n_gt; ++i) {
      const double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
      gts.push_back({BBox{x, y, x + rng.uniform(5, 20), y + rng.uniform(5, 20)},
                     static_cast<int>(rng.uniform_int(0, 1)), rng.uniform_int(0, 2)});
    }
    const auto n_det = rng.uniform_int(0, 20);
    for (std::int64_t i = 0; i < n_det; ++i) {
      Detection d;
      d.confidence = std::round(rng.uniform() * 20) / 20;
      if (rng.uniform() < 0.7) {
        const auto& g = gts[static_cast<std::size_t>(rng.uniform_int(0, n_gt - 1))];
        const double j = rng.uniform(0, 6);
        d.bbox = {g.bbox.x1 + rng.uniform(-j, j), g.bbox.y1 + rng.uniform(-j, j),
                  g.bbox.x2 + rng.uniform(0, j), g.bbox.y2 + rng.uniform(0, j)};
        d.class_id = rng.uniform() < 0.85 ? g.class_id : 1 - g.class_id;
        d.image_id = g.image_id;
      } else {
        const double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
        d.bbox = {x, y, x + 10, y + 10};
        d.class_id = static_cast<int>(rng.uniform_int(0, 1));
        d.image_id = rng.uniform_int(0, 2);
      }
      dets.push_back(d);
    }
    double sum = 0;
    int defined = 0;
    for (int cls = 0; cls < 2; ++cls) {
      const auto ap = average_precision(dets, gts, cls);
      bool has_gt = false;
      for (const auto& g : gts) has_gt |= g.class_id == cls;
      if (ap.has_value() != has_gt) {
        ++mismatches;
        continue;
      }
      if (!has_gt) continue;
      const double want = oracle::all_cuts_ap(dets, gts, cls);
      ++ap_checks;
      mismatches += *ap != want;
      sum += want;
      ++defined;
    }
    mismatches += map50(dets, gts, 2).map50 != sum / defined;
  }
  return {mismatches == 0,
          fmt("50 instances, %.0f class APs and 50 mAP values, %.0f mismatches", ap_checks,
              mismatches)};
}

// 8 ---------------------------------------------------------------------------

Outcome desk_training() {
  const auto samples = desk_samples();
  auto run = [&](RunConfig cfg, const std::string& name) {
    std::ostringstream log;
    const auto dir = scratch(name);
    auto s = app::train(cfg, samples, dir, log);
    return std::make_pair(s, dir);
  };
  RunConfig sgd = desk_config();
  RunConfig gam = sgd;
  gam.optimizer = OptimizerKind::gam;

  // Repeatability: a shortened schedule of each optimizer, run twice.
  auto repeatable = [&](RunConfig cfg, const std::string& name) {
    cfg.max_steps = 30;
    const auto a = run(cfg, name + "_rep_a").second, b = run(cfg, name + "_rep_b").second;
    return slurp(a + "/metrics.log") == slurp(b + "/metrics.log") &&
           slurp(a + "/last.ckpt") == slurp(b + "/last.ckpt");
  };
  const bool sgd_det = repeatable(sgd, "sgd");
  const bool gam_det = repeatable(gam, "gam");
  const auto s1 = run(sgd, "sgd").first;
  const auto g1 = run(gam, "gam").first;

  // Validation mAP is taken at the best epoch (the run's best.ckpt).
  const bool ok = s1.steps <= 2000 && g1.steps <= 2000 && s1.best_map50 >= 0.8 &&
                  g1.best_map50 >= 0.8 && sgd_det && gam_det;
  return {ok, fmt("sgd mAP50 %.3f (final epoch %.3f, %.0f steps, %.0fs), ", s1.best_map50,
                  s1.final_map50, double(s1.steps), s1.seconds) +
                  fmt("gam mAP50 %.3f (final epoch %.3f, %.0f steps, %.0fs), ", g1.best_map50,
                      g1.final_map50, double(g1.steps), g1.seconds) +
                  "threshold 0.80, repeatable sgd " + (sgd_det ? "yes" : "NO") + " gam " +
                  (gam_det ? "yes" : "NO")};
}

// 9 ---------------------------------------------------------------------------

Outcome ablation_harness() {
  struct Row {
    int number;
    const char* variant;
    bool ca, sc, gam;
  };
  const std::vector<Row> rows{{1, "conv", false, false, false},
                              {2, "ghost", false, false, false},
                              {3, "conv", true, false, false},
                              {4, "conv", false, true, false},
                              {9, "ghost", true, true, true}};
  const auto samples = desk_samples();
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    RunConfig cfg = desk_config();
    cfg.variant = r.variant;
    cfg.use_ca = r.ca;
    cfg.use_sc = r.sc;
    cfg.optimizer = r.gam ? OptimizerKind::gam : OptimizerKind::sgd;
    cfg.max_steps = 200;
    std::ostringstream log;
    bool row_ok = false;
    std::string note;
    try {
      const auto s = app::train(cfg, samples, scratch("ablation_" + std::to_string(r.number)), log);
      const double first = s.epochs.front().loss, last = s.epochs.back().loss;
      row_ok = s.steps == 200 && std::isfinite(first) && std::isfinite(last) && last > 0 &&
               last < first && s.epochs.size() >= 2;
      note = fmt("%.3f->%.3f", first, last);
    } catch (const std::exception& e) {
      note = e.what();
    }
    ok &= row_ok;
    detail += fmt("row %.0f ", r.number) + note + (row_ok ? "" : " (bad)") + "; ";
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

// 10 --------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BYHD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome persistence_and_cli() {
  const auto samples = desk_samples();
  RunConfig cfg = desk_config();
  cfg.max_steps = 30;
  std::ostringstream log;
  const auto a = scratch("persist_a"), b = scratch("persist_b");
  app::train(cfg, samples, a, log);
  app::train(cfg, samples, b, log);
  const bool logs_same = slurp(a + "/metrics.log") == slurp(b + "/metrics.log");

  // Restore into a fresh model, save again; both files and tensors must agree bitwise.
  auto loaded = app::load_checkpoint(a + "/last.ckpt");
  const auto original = Container::load(a + "/last.ckpt");
  std::vector<std::pair<std::string, std::string>> meta(original.metadata().begin(),
                                                        original.metadata().end());
  checkpoint_save(a + "/resaved.ckpt", loaded.model->params(), meta);
  const auto resaved = Container::load(a + "/resaved.ckpt");
  bool tensors_same = resaved.tensors().size() == original.tensors().size();
  for (const auto& t : original.tensors()) {
    const auto& u = resaved.entry(t.name);
    tensors_same &= t.payload == u.payload && t.shape == u.shape;
  }
  const bool file_same = slurp(a + "/last.ckpt") == slurp(a + "/resaved.ckpt");

  const int clean = run_cli("gradcheck --scope primitives --only conv2d");
  const int fault = run_cli("gradcheck --scope primitives --only conv2d --inject-fault conv2d");
  const int usage = run_cli("gradcheck --scope nonsense");
  const bool codes = clean == 0 && fault == 3 && usage == 2;
  return {logs_same && tensors_same && file_same && codes,
          std::string("checkpoint round trip ") + (tensors_same && file_same ? "bitwise" : "DIFFERS") +
              ", metrics logs " + (logs_same ? "byte-identical" : "DIFFER") +
              fmt(", gradcheck exit codes clean=%.0f fault=%.0f usage=%.0f", clean, fault, usage)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "parameter/FLOP reduction", 10, param_flop_reduction},
      {2, "gradient suite", 300, gradient_suite},
      {3, "closed-form exactness", 10, closed_form_exactness},
      {4, "GAM correctness", 5, gam_correctness},
      {5, "HVP accuracy", 5, hvp_accuracy},
      {6, "flat-minimum selection", 30, flat_minimum_selection},
      {7, "mAP oracle equivalence", 30, map_oracle_equivalence},
      {8, "desk-scale training", 600, desk_training},
      {9, "ablation harness", 600, ablation_harness},
      {10, "persistence and CLI", 60, persistence_and_cli},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  criterion %d  %s: %s [%.1fs, limit %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id,
                c.title, o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", OVER TIME");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
