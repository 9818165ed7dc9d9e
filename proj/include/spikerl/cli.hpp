#pragma once

namespace spikerl {

inline constexpr const char* kVersionString = "spikerl 0.1.0";

// Full command-line front end; argv in the usual main() shape.
// Returns the process exit code (0 ok, 1 run failure, 2 usage/config error).
int run_cli(int argc, const char* const* argv);

}  // namespace spikerl
