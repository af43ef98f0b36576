#pragma once

#include <iosfwd>

namespace navvox {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitDefects = 1,  // validate found defect clusters
    kExitRuntime = 2,
    kExitUsage = 64,
};

/// Entry point behind the `navvox` binary. Subcommands: gen, voxelize,
/// validate, train, bench. Output that would go to stdout/stderr is written
/// to `out` / `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace navvox
