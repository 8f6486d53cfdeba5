#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace biasci {

/// Entry point behind the `biasci` binary. Writes results to `out` (or
/// the file given by --output) and messages to `err`.
/// Exit codes: 0 success, 2 usage/domain error, 3 model-assumption
/// violation, 4 internal numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace biasci
