#pragma once

// Command-line front end: estimate, simulate and report subcommands.
//
// Exit status is 0 iff every requested output was fully written. Failures
// print one JSON object on one line to stderr, e.g.
//   {"command":"estimate","error":"..."}
// Usage errors exit 2, runtime failures 1.

namespace driftdr::cli {

int run(int argc, const char* const* argv);

}  // namespace driftdr::cli
