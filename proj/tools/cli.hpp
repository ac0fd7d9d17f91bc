#pragma once

#include <iosfwd>

namespace senslab::cli {

/// Runs the senslab command line. Returns 0 on success, 1 on a module error
/// and 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace senslab::cli
