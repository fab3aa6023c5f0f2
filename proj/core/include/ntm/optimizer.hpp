#pragma once

#include <cstddef>
#include <vector>

#include "ntm/autodiff.hpp"

namespace ntm {

/// Clamps every gradient component to [-bound, bound].
void clip_gradients(ParameterStore& store, double bound);

struct RmsPropConfig {
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double decay = 0.95;   // rho
  double epsilon = 1e-4;

  void validate() const;
};

/// RMSProp with a centred second-moment estimate and momentum:
///   n <- rho n + (1 - rho) g^2
///   m <- rho m + (1 - rho) g
///   d <- momentum d - lr g / sqrt(n - m^2 + eps)
///   theta <- theta + d
class RmsProp {
 public:
  struct Slot {
    std::vector<double> mean_square;
    std::vector<double> mean;
    std::vector<double> delta;
  };

  RmsProp() = default;
  RmsProp(const ParameterStore& store, RmsPropConfig config);

  const RmsPropConfig& config() const { return config_; }
  std::size_t steps() const { return steps_; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

  void update(ParameterStore& store);

  /// Used when restoring a checkpoint.
  void restore(std::vector<Slot> slots, std::size_t steps);

 private:
  RmsPropConfig config_;
  std::vector<Slot> slots_;
  std::size_t steps_ = 0;
};

}  // namespace ntm
