#pragma once

#include <iosfwd>

namespace scq {

/// Entry point of the `scq` tool. Returns 0 on success, 1 on usage or
/// configuration errors and 2 on statistical or runtime failures.
/// `out` receives the one-line summary, `err` the diagnostics.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scq
