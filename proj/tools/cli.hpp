#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nmtune::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Entry point of the `nmtune` tool. Errors go to `err` as one JSON object
/// per line; results to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nmtune::cli
