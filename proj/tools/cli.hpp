#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neuroute::cli {

/// Runs one subcommand. Returns the process exit status; failures print a
/// single `error: ...` line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neuroute::cli
