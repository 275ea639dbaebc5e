#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "sawtooth/predictor.hpp"
#include "sawtooth/schedule.hpp"
#include "sawtooth/seeds.hpp"
#include "sawtooth/time_series.hpp"

namespace sawtooth {

/// One reverse transition tau_from -> tau_to inside Sawtooth pass `iteration`
/// (1-based). tau_to == 0 marks the final step of a pass.
struct StepLabel {
  int iteration;
  int tau_from;
  int tau_to;
  friend bool operator==(const StepLabel&, const StepLabel&) = default;
};

struct Trajectory {
  explicit Trajectory(TimeSeries initial) : final_state(std::move(initial)) {}

  /// Initial state followed by one state per transition; empty when
  /// recording was disabled.
  std::vector<TimeSeries> states;
  std::vector<StepLabel> steps;
  std::size_t nfe = 0;
  std::chrono::nanoseconds wall_time{0};
  TimeSeries final_state;

  bool recorded() const noexcept { return !states.empty(); }
};

struct SampleOptions {
  bool record_states = true;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sigma_{tau} = eta * sqrt((1 - ab_prev) / (1 - ab_cur)) * sqrt(1 - ab_cur / ab_prev)
double sigma_from_eta(double eta, int tau_prev, int tau_cur, const NoiseSchedule& schedule);

/// Deterministic reverse step (sigma = 0):
///   x_prev = sqrt(ab_prev) * (x_cur - sqrt(1 - ab_cur) * eps_hat) / sqrt(ab_cur)
///          + sqrt(1 - ab_prev) * eps_hat
/// tau_prev == 0 uses ab_prev = 1; tau_prev == tau_cur returns x_cur.
TimeSeries ddim_step(const TimeSeries& x_cur, const TimeSeries& eps_hat, int tau_cur, int tau_prev,
                     const NoiseSchedule& schedule);

/// General reverse step; adds sigma * noise and shrinks the eps_hat
/// coefficient to sqrt(1 - ab_prev - sigma^2).
TimeSeries ddim_step(const TimeSeries& x_cur, const TimeSeries& eps_hat, int tau_cur, int tau_prev,
                     double sigma, const TimeSeries& noise, const NoiseSchedule& schedule);

/// One DDIM pass over plan.taus() from T down to 0. Uses only the first pass of
/// a multi-pass plan. With eta == 0 the generator is never touched.
Trajectory ddim_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const SamplingPlan& plan, const NoiseSchedule& schedule, double eta, Rng& rng,
                       const SampleOptions& options = {});
Trajectory ddim_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const SamplingPlan& plan, const NoiseSchedule& schedule, double eta,
                       std::uint64_t seed, const SampleOptions& options = {});

/// Ancestral DDPM over every step 1..T (DDIM with the full subsequence and eta = 1).
Trajectory ddpm_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const NoiseSchedule& schedule, Rng& rng, const SampleOptions& options = {});
Trajectory ddpm_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const NoiseSchedule& schedule, std::uint64_t seed,
                       const SampleOptions& options = {});

/// State handed from the end of Sawtooth pass k to the start of pass k + 1,
/// where it is treated as a sample at step T of the reset schedule. The state
/// passes through unchanged: no renoising and no rescaling.
TimeSeries sawtooth_handoff(const TimeSeries& end_of_pass);

/// plan.iterations() deterministic DDIM passes, chained through
/// sawtooth_handoff. The generator is accepted for interface symmetry and
/// never consumed.
Trajectory sawtooth_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                           const NoiseSchedule& schedule, const SamplingPlan& plan, Rng& rng,
                           const SampleOptions& options = {});
Trajectory sawtooth_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                           const NoiseSchedule& schedule, const SamplingPlan& plan,
                           std::uint64_t seed, const SampleOptions& options = {});

std::size_t count_nfe(const Trajectory& trajectory) noexcept;

enum class SamplerMethod { ddpm, ddim, sawtooth };

const char* to_string(SamplerMethod method) noexcept;
SamplerMethod sampler_method_from_string(const std::string& name);

struct BatchRequest {
  SamplerMethod method = SamplerMethod::sawtooth;
  double eta = 0.0;
  std::size_t count = 1;
  std::size_t channels = 1;
  std::size_t length = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  SampleOptions options{};
};

/// Draws `count` independent trajectories. Sample i starts from a standard
/// normal x_T and uses its own generator seeded with derive_seed(seed, i), so
/// results do not depend on the thread count.
std::vector<Trajectory> sample_batch(const BatchRequest& request, const EpsilonPredictor& predictor,
                                     const NoiseSchedule& schedule, const SamplingPlan& plan);

// Trajectory file:
//   #sawtooth-trajectory v1
//   sample,k,tau_from,tau_to,checksum
//   <one row per transition; checksum is FNV-1a of the state after the
//    transition, or '-' when states were not recorded>
void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories);

}  // namespace sawtooth
