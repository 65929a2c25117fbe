#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scene::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one `scene` subcommand. `args` excludes the program name. Data goes to
/// files named by flags; `out` receives human-readable summaries and `err`
/// receives the single-line `error: <kind>: <detail>` report.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Oracle, Kaplan-Meier and gradient invariants on small fixed-seed inputs.
std::vector<CheckResult> run_selfcheck();

}  // namespace scene::cli
