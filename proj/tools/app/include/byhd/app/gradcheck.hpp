#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace byhd::app {

enum class GradScope { primitives, blocks, model };

struct GradcheckResult {
  std::string name;
  std::string dtype;  // "f32" or "f64"
  int cases = 0;
  double worst = 0;   // largest relative error over cases and inputs
  std::string worst_input;
  double tolerance = 0;
  std::int64_t kinks = 0;
  bool pass() const { return worst <= tolerance; }
};

struct GradcheckOptions {
  GradScope scope = GradScope::primitives;
  int cases = 5;                // random shapes per check
  std::uint64_t seed = 0;
  std::string fault;            // corrupt the backward pass of this check (testing aid)
  std::string only;             // run just this check when non-empty
};

double gradcheck_tolerance(bool fp64);

/// Names of the checks in a scope, in run order.
std::vector<std::string> gradcheck_names(GradScope scope);

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options);

/// One line per result; returns true when all pass.
bool print_gradcheck(const std::vector<GradcheckResult>& results, std::ostream& out,
                     std::ostream& err);

}  // namespace byhd::app
