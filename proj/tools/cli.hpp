#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lgsel::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kProvider = 3 };

/// Runs the `lgsel` command line. Diagnostics go to `err` as one line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lgsel::cli
