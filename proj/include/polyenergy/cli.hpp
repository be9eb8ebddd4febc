#pragma once

#include <iosfwd>

namespace polyenergy {

// Command-line front end (model-build, energy-compute, energy-eval,
// residual-check, bench). Split out from main() so tests can drive it.
// Returns a process exit code; solver and I/O failures come back as 1.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace polyenergy
