#pragma once

// Finite-difference gradient checks of whole sequence models.

#include <cstddef>
#include <cstdint>

#include "ntm/gradient_check.hpp"
#include "ntm/model.hpp"

namespace ntm {

/// Episode of `steps` random bit inputs and random bit targets, all scored.
Episode random_episode(std::size_t input_width, std::size_t output_width, std::size_t steps,
                       std::uint64_t seed);

/// Overwrites every parameter with U(-scale, scale).
void randomize_parameters(ParameterStore& store, double scale, std::uint64_t seed);

/// Builds the model, draws its parameters from U(-0.5, 0.5), unrolls it over
/// a random episode and compares analytic gradients with central differences.
GradientCheckReport check_model_gradients(const ModelConfig& config, std::size_t steps,
                                          std::uint64_t seed, double eps = 1e-5,
                                          double tol = 1e-4);

}  // namespace ntm
