#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rbal {

/// Process exit codes of the rbal tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitInput = 3,
    kExitNumerical = 4,
    kExitAssertion = 5,
};

/// Runs one command line (args[0] is the program name). Reports go to `out`,
/// diagnostics to `err`. Never throws; failures map to an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rbal
