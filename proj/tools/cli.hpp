#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "optira/pipeline.hpp"

namespace optira::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitBackend = 3,
  kExitInfeasible = 4,
  kExitInternal = 5,
};

/// Exit status for a finished `solve` run.
int exit_code_for(RunOutcome outcome);

/// Entry point shared by the executable and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Long names of every flag the parser accepts, across all subcommands.
std::vector<std::string> registered_flags();

}  // namespace optira::cli
