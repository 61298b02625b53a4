#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "uds/numerics/parameters.hpp"
#include "uds/numerics/tape.hpp"

namespace uds::num {

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t samples_per_parameter = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Builds the scalar on a fresh tape.
using LossFn = std::function<Var(Tape&)>;

// Compares backward() against central differences on the given parameters.
// Error per coordinate is |analytic - numeric| / max(1, |numeric|).
GradCheckResult gradient_check(const LossFn& f, const std::vector<Parameter*>& params,
                               const GradCheckOptions& options = {});

}  // namespace uds::num
