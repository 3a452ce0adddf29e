#pragma once

#include <string>
#include <vector>

namespace qks::cli {

/// Entry point shared by the qks binary and the test suite.
/// args[0] is the program name. Exit codes: 0 success, 1 usage,
/// 2 data/format error, 3 verification failure.
int run(std::vector<std::string> args);

} // namespace qks::cli
