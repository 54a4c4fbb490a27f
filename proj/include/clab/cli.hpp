#pragma once

namespace clab {

// Dispatches argv to a subcommand. Returns 0 on success, 1 for configuration
// problems (bad flags, malformed config files), 2 for runtime failures.
int run_cli(int argc, const char* const* argv);

}  // namespace clab
