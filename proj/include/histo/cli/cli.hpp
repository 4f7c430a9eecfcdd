#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace histo::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,     // bad flags or configuration
  kExitIo = 3,        // missing or unreadable inputs
  kExitData = 4,      // inputs present but inconsistent or malformed
  kExitInternal = 5,  // anything else
};

/// Runs one `histopipe` command line (args exclude the program name) and
/// returns its exit code. Diagnostics go to `err`, progress to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace histo::cli
