#pragma once

#include <iosfwd>

namespace ebtforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPreparation = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitNoTrace = 4;
inline constexpr int kExitBackend = 5;

/// Full command line entry point; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ebtforge::cli
