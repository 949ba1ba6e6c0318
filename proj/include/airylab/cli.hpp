#pragma once

#include <string>
#include <vector>

namespace airylab {

// Exit codes: 0 success, 2 invalid usage/config, 3 numeric failure
// (partial artifacts are left in place for inspection).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// Full CLI entry point; argv-style and vector-style (the latter is what the
// reproducibility tests drive in-process).
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

} // namespace airylab
