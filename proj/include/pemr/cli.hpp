#pragma once

#include <string>
#include <vector>

namespace pemr {

// Command-line entry point behind the pemr binary. `args` is the argument
// list without the program name. Returns the process exit code: 0 on success
// (including --help), 2 on usage errors, 1 on runtime failures.
int dispatch(const std::vector<std::string>& args);

}  // namespace pemr
