#pragma once

#include <iosfwd>

namespace reorient {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `reorient` tool. Returns 0 on success, 2 for usage
/// errors (bad flags, bad config values, empty inputs) and 1 for failures
/// while running (I/O, missing files, library errors).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reorient
