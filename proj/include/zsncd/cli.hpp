#pragma once

namespace zsncd::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIoFailure = 2, kDiverged = 3 };

/// Parses argv and runs one subcommand; never throws.
int run(int argc, const char* const* argv);

}  // namespace zsncd::cli
