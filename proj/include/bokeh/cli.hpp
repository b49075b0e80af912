#pragma once

#include <iosfwd>

namespace bokeh {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Subcommands: render, synth, train, eval, ablate, serve. Usage errors print
/// help to `err` and return 1; runtime failures print a diagnostic and
/// return 2.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bokeh
