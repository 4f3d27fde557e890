#pragma once

#include <string>
#include <vector>

namespace mgr::cli {

// Runs one subcommand; returns the process exit status. `args` excludes the
// program name. Errors are reported as a single machine-parsable line on
// stderr: "error: <kind>: <message>".
int dispatch(const std::vector<std::string>& args);

}  // namespace mgr::cli
