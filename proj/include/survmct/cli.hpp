#pragma once

// Command-line front end.  Exit codes: 0 success (regardless of test
// outcome), 2 configuration error, 3 data error.

#include <string>
#include <vector>

namespace survmct {

int run_cli(int argc, char** argv);
// Convenience overload for in-process invocation (tests); `args` excludes the
// program name.
int run_cli(const std::vector<std::string>& args);

} // namespace survmct
