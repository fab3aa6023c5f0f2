#include "ntm/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace ntm {

void clip_gradients(ParameterStore& store, double bound) {
  if (!(bound > 0)) throw ConfigError("clip bound must be positive");
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (auto& g : store[p].grad) g = std::clamp(g, -bound, bound);
  }
}

void RmsPropConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(decay > 0 && decay < 1)) throw ConfigError("decay must lie in (0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
}

RmsProp::RmsProp(const ParameterStore& store, RmsPropConfig config) : config_(config) {
  config_.validate();
  slots_.resize(store.size());
  for (std::size_t p = 0; p < store.size(); ++p) {
    const std::size_t n = store[p].value.size();
    slots_[p].mean_square.assign(n, 0.0);
    slots_[p].mean.assign(n, 0.0);
    slots_[p].delta.assign(n, 0.0);
  }
}

void RmsProp::update(ParameterStore& store) {
  if (store.size() != slots_.size()) throw ConfigError("optimizer does not match parameter store");
  const double rho = config_.decay;
  const double lr = config_.learning_rate;
  const double mom = config_.momentum;
  const double eps = config_.epsilon;
  for (std::size_t p = 0; p < store.size(); ++p) {
    Parameter& param = store[p];
    Slot& s = slots_[p];
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      const double g = param.grad[i];
      s.mean_square[i] = rho * s.mean_square[i] + (1.0 - rho) * g * g;
      s.mean[i] = rho * s.mean[i] + (1.0 - rho) * g;
      // n - m^2 is a variance; rounding can push it a hair below zero.
      const double var = std::max(s.mean_square[i] - s.mean[i] * s.mean[i], 0.0);
      s.delta[i] = mom * s.delta[i] - lr * g / std::sqrt(var + eps);
      param.value[i] += s.delta[i];
    }
  }
  ++steps_;
}

void RmsProp::restore(std::vector<Slot> slots, std::size_t steps) {
  slots_ = std::move(slots);
  steps_ = steps;
}

}  // namespace ntm
