#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dytok::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kFormatError = 2,
  kDataError = 3,
  kInfeasible = 4,
};

/// Runs the dytok command line. `args` excludes the program name. Results go
/// to `out` unless an output path is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dytok::cli
