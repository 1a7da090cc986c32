#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace freemesh::cli {

enum ExitCode : int {
  kOk = 0,
  kFormat = 1,
  kPrecondition = 2,
  kVersion = 3,
  kNumerical = 4,
};

// Runs one command line (without the program name). Normal output goes to
// `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace freemesh::cli
