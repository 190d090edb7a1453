#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neura::cli {

enum ExitCode : int { OK = 0, USAGE = 1, VALIDATION = 2, INTEGRITY = 3 };

/// Environment variable naming the default output root.
inline constexpr const char* kOutEnv = "NEURASIM_OUT";

/// The neurasim command line: compile, run, sweep and bloat. Everything the
/// tool prints goes to `out` / `err`; the return value is the exit code.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neura::cli
