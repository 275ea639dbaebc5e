#pragma once

#include <cstdint>

#include "sawtooth/denoiser.hpp"

namespace sawtooth {

/// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
/// parameters whose true gradient is ~0 from reporting round-off as error.
double gradient_relative_error(double analytic, double numeric, double floor = 1e-7);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
  std::size_t probes = 0;
};

/// Compares denoiser_backward against central differences of
/// L = sum (eps_hat(x, t) - target)^2 on `probes` random (x, t, target)
/// triples, perturbing every parameter by +-step.
GradientCheckResult check_gradients(const Denoiser& model, std::size_t probes, double step,
                                    std::uint64_t seed);

}  // namespace sawtooth
