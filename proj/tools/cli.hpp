#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qagg/checks.hpp"

namespace qagg::cli {

enum ExitCode : int {
  kSuccess = 0,
  kNumericFailure = 1,
  kUsageError = 2,
  kFormatError = 3,
};

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

/// The body of `qagg check`, with replaceable hooks.
int run_check(std::uint64_t seed, int cases, std::ostream& out, std::ostream& err,
              const CheckHooks& hooks = {});

}  // namespace qagg::cli
