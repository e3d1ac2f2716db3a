#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcpforge::cli {

// Process exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;
inline constexpr int exit_config = 3;
inline constexpr int exit_input = 4;
inline constexpr int exit_provider = 5;

// Runs one command line (args excludes the program name). Results go to
// `out` unless a subcommand writes to --out; logs and usage go to `err`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace mcpforge::cli
