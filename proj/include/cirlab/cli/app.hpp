#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cirlab::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  ///< bad config, bad data or a runtime failure
  kExitUsage = 2,    ///< unknown subcommand or malformed arguments
  kExitPartial = 3,  ///< the command finished but some records failed
};

/// Entry point behind the `cirlab` binary. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace cirlab::cli
