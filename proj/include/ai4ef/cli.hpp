#pragma once

#include <iosfwd>

namespace ai4ef::cli {

/// Subcommands: ingest, train, evaluate, run-all, serve, predict, deploy.
/// Returns 0 on success, 1 on a module error (reported on `err`) and 2 on a
/// usage error.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace ai4ef::cli
