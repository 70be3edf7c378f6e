#pragma once

#include <ostream>

namespace layersep {

/// Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace layersep
