#include "ntm/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ntm {

GradientCheckReport gradient_check(const LossFn& loss, ParameterStore& store, double eps,
                                   double tol) {
  if (!(eps > 0)) throw ConfigError("gradient_check: eps must be positive");

  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<std::vector<Real>> analytic;
  analytic.reserve(store.size());
  for (std::size_t p = 0; p < store.size(); ++p) analytic.push_back(store[p].grad);

  auto evaluate = [&] {
    Tape tape(/*record_gradients=*/false);
    return loss(tape).scalar();
  };

  GradientCheckReport report;
  for (std::size_t p = 0; p < store.size(); ++p) {
    Parameter& param = store[p];
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      const Real saved = param.value[i];
      param.value[i] = saved + eps;
      const Real plus = evaluate();
      param.value[i] = saved - eps;
      const Real minus = evaluate();
      param.value[i] = saved;

      const Real numeric = (plus - minus) / (2.0 * eps);
      const Real a = analytic[p][i];
      const Real denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const Real rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err || report.worst_param.empty()) {
        if (rel >= report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst_param = param.name;
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  report.passed = report.max_rel_err < tol;
  return report;
}

}  // namespace ntm
