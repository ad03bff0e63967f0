#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "dmtn/autodiff.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn {

/// A deterministic scalar function of the parameters, built on a fresh tape.
using ScalarFunction = std::function<ad::Var(ad::Tape&, const ParameterStore&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients against central differences for every
/// entry of every parameter. Relative error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult gradient_check(const ScalarFunction& f, const ParameterStore& params, double eps);

}  // namespace dmtn
