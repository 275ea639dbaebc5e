#include "sawtooth/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sawtooth/seeds.hpp"

namespace sawtooth {

namespace {

double squared_error(const Denoiser& model, const TimeSeries& x, int t, const TimeSeries& target) {
  const auto out = denoiser_forward(model, x, t).eps_hat;
  double loss = 0.0;
  const auto o = out.values();
  const auto y = target.values();
  for (std::size_t i = 0; i < o.size(); ++i) loss += (o[i] - y[i]) * (o[i] - y[i]);
  return loss;
}

}  // namespace

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradientCheckResult check_gradients(const Denoiser& model, std::size_t probes, double step,
                                    std::uint64_t seed) {
  const auto& arch = model.architecture();
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_step(1, arch.diffusion_steps);
  GradientCheckResult result;
  result.probes = probes;

  const auto base = model.parameters().flatten();
  result.parameters = base.size();
  Denoiser probe_model = model;
  auto perturbed = model.parameters();

  for (std::size_t p = 0; p < probes; ++p) {
    const auto x = standard_normal(arch.channels, arch.length, rng);
    const auto target = standard_normal(arch.channels, arch.length, rng);
    const int t = pick_step(rng);

    const auto forward = denoiser_forward(model, x, t);
    const auto residual = linear_combination(2.0, forward.eps_hat, -2.0, target);
    const auto analytic = denoiser_backward(model, forward.cache, residual).flatten();

    auto values = base;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      perturbed.assign(values);
      probe_model.set_parameters(perturbed);
      const double up = squared_error(probe_model, x, t, target);
      values[i] = original - step;
      perturbed.assign(values);
      probe_model.set_parameters(perturbed);
      const double down = squared_error(probe_model, x, t, target);
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      result.max_relative_error =
          std::max(result.max_relative_error, gradient_relative_error(analytic[i], numeric));
    }
  }
  return result;
}

}  // namespace sawtooth
