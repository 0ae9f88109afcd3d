#pragma once

#include <iosfwd>

namespace smcd {

/// Entry point of the `smcderiv` tool. CSV goes to `out` unless --output is
/// given; diagnostics go to `err`. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace smcd
