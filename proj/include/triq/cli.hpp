#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace triq {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,  // bad flags, bad config, unreadable or malformed data
  kExitNumeric = 3,
};

/// Runs `triq <split|train|finetune|predict|evaluate|visualize> [flags]`.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace triq
