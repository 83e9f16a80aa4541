#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace augmentor {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitExternal = 3;

// Runs one subcommand. args[0] is the program name. Writes a one-line JSON
// summary {cmd, status, outputs, seed} to `out` and progress to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace augmentor
