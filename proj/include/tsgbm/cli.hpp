#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsgbm::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,       // bad flags or malformed config
  kValidation = 3,  // a precondition or invariant does not hold
  kRuntime = 4,     // numerical or I/O failure while running a stage
};

/// Runs one subcommand: simulate | train | evaluate | scatter | crlb.
/// `args` excludes the program name. Machine-readable summaries go to `out`,
/// progress and diagnostics to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `%.17g`-style text, independent of the C locale.
std::string format_double(double value);

}  // namespace tsgbm::cli
