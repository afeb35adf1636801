// Command-line driver: landscapes, flows, basin sweeps, verification
// batteries, and Markov sampling as reproducible file-emitting commands.
//
// Exit codes: 0 success, 1 verification failure, 2 config error,
// 3 numerical termination failure.
#pragma once

namespace mcflow::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Parses argv and runs one subcommand; returns the process exit code.
int run(int argc, const char* const* argv);

} // namespace mcflow::cli
