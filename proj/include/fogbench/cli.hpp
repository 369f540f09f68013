#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fogbench {

inline constexpr const char* kToolVersion = "0.1.0";

/// Stable process exit codes.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// key=value lines; blank lines and lines starting with '#' are skipped.
/// Throws IoError if unreadable or a line lacks '='.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// Runs the command line (args exclude the program name) and returns the exit
/// code. Diagnostics go to `err`, results and help to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fogbench
