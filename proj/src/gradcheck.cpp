#include "dmtn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dmtn/errors.hpp"

namespace dmtn {

namespace {

double evaluate(const ScalarFunction& f, const ParameterStore& params) {
  ad::Tape tape;
  const double v = f(tape, params).item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: function returned a non-finite value");
  return v;
}

}  // namespace

GradCheckResult gradient_check(const ScalarFunction& f, const ParameterStore& params, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("gradient_check: eps must be positive");

  GradientMap analytic;
  {
    ad::Tape tape;
    ad::Var loss = f(tape, params);
    if (!std::isfinite(loss.item())) {
      throw NumericError("gradient_check: function returned a non-finite value");
    }
    analytic = tape.backward(loss);
  }

  GradCheckResult result;
  ParameterStore probe = params;
  for (auto& entry : probe) {
    const auto it = analytic.find(entry.name);
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double saved = entry.value[i];
      entry.value[i] = saved + eps;
      const double up = evaluate(f, probe);
      entry.value[i] = saved - eps;
      const double down = evaluate(f, probe);
      entry.value[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double exact = it == analytic.end() ? 0.0 : it->second[i];
      const double denom = std::max({std::fabs(exact), std::fabs(numeric), 1e-8});
      const double err = std::fabs(exact - numeric) / denom;
      ++result.entries_checked;
      if (err > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = err;
        result.worst_parameter = entry.name;
        result.worst_index = i;
        result.analytic = exact;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dmtn
