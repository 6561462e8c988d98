#pragma once

namespace drna::cli {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfig = 1;       // unusable flags or config file
inline constexpr int kExitCheckFailed = 2;  // a requested verdict did not hold
inline constexpr int kExitRuntime = 3;      // I/O or numerical failure mid-run

/// Entry point behind the command-line binary; also callable from tests.
/// argv[0] is the program name. Subcommands: run-tracking,
/// run-assumption-check, run-rate-fit, run-oracle-check.
int run(int argc, const char* const* argv);

}  // namespace drna::cli
