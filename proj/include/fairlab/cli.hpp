#pragma once

namespace fairlab {

/// Entry point of the `fairlab` tool. Subcommands: gen-data, train, sweep,
/// threshold, report. Returns 0 on success, 1 on a usage error and 2 on a
/// runtime error; diagnostics go to stderr.
int cli_main(int argc, char** argv);

}  // namespace fairlab
