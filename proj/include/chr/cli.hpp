#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace chr {

// Entry point behind the `chr` executable. `args` excludes the program name.
// Returns the process exit code; diagnostics go to `err`.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace chr
