#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace voxclust::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kFormat = 3,
  kIo = 4,
  kData = 5,
};

/// Runs one voxclust command line (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace voxclust::cli
