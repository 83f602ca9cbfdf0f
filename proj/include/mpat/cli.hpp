#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mpat::cli {

/// Exit codes of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // invalid data, failed check, I/O error
inline constexpr int kExitUsage = 2;    // unknown subcommand or malformed command line

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace mpat::cli
