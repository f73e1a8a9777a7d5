#pragma once

// Randomized property suite behind `qagg check`.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qagg/core.hpp"
#include "qagg/objective.hpp"

namespace qagg {

using GradientFn = std::function<Vector(const FunctionDictionary&, const ResponseVector&,
                                        const QConfig&, const SimplexWeights&)>;

/// Replaceable pieces, so the suite itself can be tested against a bug.
struct CheckHooks {
  GradientFn gradient;  // empty: q_gradient
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;      // largest observed error
  double tolerance = 0.0;
};

struct CheckReport {
  std::vector<PropertyResult> properties;

  bool all_passed() const;
  std::vector<std::string> failed() const;
};

/// Each property is evaluated on `cases` random instances derived from seed.
CheckReport run_checks(std::uint64_t seed, int cases, const CheckHooks& hooks = {});

std::string format_report(const CheckReport& report);

}  // namespace qagg
