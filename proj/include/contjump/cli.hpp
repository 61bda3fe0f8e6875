#pragma once

#include <ostream>

namespace contjump {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

/** @brief Entry point of the contjump tool; returns the process exit code. */
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace contjump
