#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dercoord {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitDomainError = 1, kExitUsage = 2 };

/// Entry point of the `dercoord` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Keys accepted by `--set key=value`.
const std::vector<std::string>& override_keys();

}  // namespace dercoord
