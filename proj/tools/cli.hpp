#pragma once

namespace surfacenet::cli {

/// Entry point for the surfacenet command-line tool.
/// Exit codes: 0 success, 2 configuration error, 3 runtime error.
int run(int argc, const char* const* argv);

} // namespace surfacenet::cli
