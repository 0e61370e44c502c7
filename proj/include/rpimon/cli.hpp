#pragma once

#include <iosfwd>

namespace rpimon {

// Exit codes: 0 success, 1 input error, 2 non-convergence or failed check.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rpimon
