#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lytnet::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kBadWeights = 2,
    kBadImage = 3,
    kEmptyLabels = 4,
    kBadStream = 5,
};

/// Runs the `lytnet` command line. `args` excludes the program name. Normal
/// output goes to `out`; diagnostics, the replay summary and every
/// `error: ...` line go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lytnet::cli
