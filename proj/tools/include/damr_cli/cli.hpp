#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace damr::cli {

// Runs one `damr <subcommand> ...` invocation. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace damr::cli
