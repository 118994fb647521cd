#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace derain {

/// Entry point for the `derain` command. Exit codes: 0 success, 1 usage
/// error, 2 runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace derain
