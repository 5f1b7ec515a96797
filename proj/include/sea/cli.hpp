#pragma once

#include <iosfwd>

namespace sea {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad arguments, configuration or missing inputs
inline constexpr int kExitRuntime = 2;  // failure while running

/// The `sea` command line. Logs go to `log`; artifacts only to files.
int run_cli(int argc, const char* const* argv, std::ostream& log);

}  // namespace sea
