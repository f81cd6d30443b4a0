#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace binagree {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,      // bad arguments, malformed input data or configuration
  kExitIo = 2,         // missing input, unwritable output
  kExitNumerical = 3,  // the model could not be fitted
};

/// Runs the command-line front end. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace binagree
