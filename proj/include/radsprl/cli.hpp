#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace radsprl {

// Runs the command line (args excludes the program name). Returns the process
// exit code: 0 success, 2 usage or validation failure, 1 anything else.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace radsprl
