#pragma once

#include <iosfwd>

namespace rankphase {

// Exit codes: 0 success, 1 runtime or verification failure, 2 usage,
// config or input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point shared by the rank_phase binary and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rankphase
