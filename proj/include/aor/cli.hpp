#pragma once

#include <string>
#include <vector>

namespace aor::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kValidationError = 1,
  kSolverNotConverged = 2,
  kIoError = 3,
};

/// Run the command line given subcommand + flags (no program name).
/// Returns the process exit code; never throws.
int run(const std::vector<std::string>& args);

}  // namespace aor::cli
