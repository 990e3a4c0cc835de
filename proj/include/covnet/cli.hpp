#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "covnet/model_input.hpp"
#include "covnet/play.hpp"

namespace covnet {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Runs `covnet <subcommand> ...`. Flags may also come from a key = value file given with --config,
/// keys grouped under [gen], [train], ... sections. Flags on the command line win.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct LoadedPlays {
  std::vector<PreparedPlay> plays;
  long malformed = 0;
  long filtered = 0;
};

/// Parses a play file and keeps the plays usable for `task`.
LoadedPlays load_plays(const std::string& path, Task task);

}  // namespace covnet
