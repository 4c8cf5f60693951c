#pragma once

#include <string>
#include <vector>

namespace jsr {

// Command-line surface: subcommands gen, solve, train, eval, bench.
// Returns 0 on success, 2 on configuration/usage errors, 3 on numeric errors.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace jsr
