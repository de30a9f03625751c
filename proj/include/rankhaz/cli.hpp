#pragma once

#include <string>
#include <vector>

namespace rankhaz::cli {

// Parses and executes one CLI invocation (without the program name).
// Exit codes: 0 success, 2 validation failure, 3 non-convergence,
// 4 replication failure budget exceeded.
int run_cli(const std::vector<std::string>& args);

}  // namespace rankhaz::cli
