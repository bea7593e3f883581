#pragma once

#include <string>

#include "crseval/errors.hpp"

namespace crseval::cli {

// 0 success, 2 config/usage, 3 upstream service, 4 data contract.
int exit_code_for(ErrorKind kind);

// Parse argv and dispatch to a subcommand. Throws crseval::Error for
// operational failures; the binary's main() maps those to exit codes.
int run(int argc, const char* const* argv);

} // namespace crseval::cli
