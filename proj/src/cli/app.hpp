#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace transaudit::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,     // unreadable or invalid input, bad config, missing credential
  kExitFindings = 3,  // audit violations, empty overlap
  kExitExternal = 4,  // engine or annotator service failure
};

/// Runs `transaudit <args...>` (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace transaudit::cli
