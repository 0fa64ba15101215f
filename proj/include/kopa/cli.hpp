#pragma once

#include <iosfwd>

namespace kopa {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitInput = 3,
  kExitConvergence = 4,
};

/// Entry point of the `kopa` tool: subcommands select, fit, denoise, curve
/// and sim. Results go to files named by --out (and friends) or to `out`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace kopa
