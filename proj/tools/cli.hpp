#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace paddle::cli {

/// Exit codes of the command-line front end.
enum ExitCode : int { kSuccess = 0, kRuntimeError = 1, kUsageError = 2 };

/// Runs one invocation (`args` excludes the program name); returns the
/// process exit code. Diagnostics go to `err`, reports to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace paddle::cli
