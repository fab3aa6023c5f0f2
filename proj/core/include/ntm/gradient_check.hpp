#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "ntm/autodiff.hpp"

namespace ntm {

struct GradientCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Builds the loss on a fresh tape from the current parameter values. Must be
/// deterministic: it is called 2 * store.scalar_count() + 1 times.
using LossFn = std::function<Var(Tape&)>;

/// Compares backward() against central differences (f(t+eps) - f(t-eps)) / 2eps
/// for every scalar parameter. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8). Parameter values are restored on exit.
GradientCheckReport gradient_check(const LossFn& loss, ParameterStore& store, double eps,
                                   double tol);

}  // namespace ntm
