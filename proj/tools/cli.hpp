#pragma once

#include <iosfwd>

namespace lcstop::cli {

/// Runs one subcommand. Returns 0 on success, 2 when an assumption is violated
/// or a result is inconclusive (outputs still written), 1 on error.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace lcstop::cli
