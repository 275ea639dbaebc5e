#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sawtooth {

/// Variance schedule over diffusion steps 1..T.
///
/// Step indices are 1-based, matching the usual q(x_t | x_0) notation. Step 0
/// denotes clean data: alpha_bar(0) is defined as 1 so the final reverse
/// transition lands exactly on the model's estimate of x_0.
///
/// Instances are immutable once built and can be shared between samplers.
class NoiseSchedule {
 public:
  /// Builds from explicit betas. Every beta must lie strictly inside (0, 1).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const noexcept { return static_cast<int>(betas_.size()); }
  double beta_start() const noexcept { return betas_.front(); }
  double beta_end() const noexcept { return betas_.back(); }

  double beta(int t) const;
  double alpha(int t) const;
  /// Valid for t in 0..T.
  double alpha_bar(int t) const;

  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

 private:
  explicit NoiseSchedule(std::vector<double> betas);

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

/// Strictly increasing step subsequence tau_1 < ... < tau_S = T, repeated for
/// `iterations` Sawtooth passes. iterations == 1 is plain DDIM.
class SamplingPlan {
 public:
  SamplingPlan(int total_diffusion_steps, std::vector<int> taus, int iterations);

  int diffusion_steps() const noexcept { return diffusion_steps_; }
  const std::vector<int>& taus() const noexcept { return taus_; }
  int iterations() const noexcept { return iterations_; }
  int steps_per_iteration() const noexcept { return static_cast<int>(taus_.size()); }
  int total_steps() const noexcept { return iterations_ * steps_per_iteration(); }

 private:
  int diffusion_steps_;
  std::vector<int> taus_;
  int iterations_;
};

/// Affine interpolation from beta_start to beta_end inclusive.
std::vector<double> linear_betas(int steps, double beta_start, double beta_end);

NoiseSchedule build_schedule(int steps, double beta_start, double beta_end);

/// S indices from 1..T: round(i * T / S) for i = 1..S, with ties rounded up.
/// The grid spacing T/S is at least 1, so the rounded values stay strictly
/// increasing and the last one is exactly T.
std::vector<int> select_subsequence(int steps, int count);

/// Single-pass DDIM plan over `count` evenly spaced steps.
SamplingPlan make_ddim_plan(int steps, int count);

struct SawtoothSetup {
  NoiseSchedule schedule;
  SamplingPlan plan;
};

/// Splits `total_steps` evenly over `iterations` passes. Every pass reuses the
/// same schedule and subsequence.
SawtoothSetup build_sawtooth_plan(int total_steps, int iterations, int steps, double beta_start,
                                  double beta_end);

/// The plain-text `[schedule]` section of a run configuration.
struct ScheduleConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int total_steps = 100;
  int sawtooth_n = 1;

  /// Throws std::invalid_argument listing every violated precondition.
  void validate() const;
  SawtoothSetup build() const;

  /// Writes "[schedule]" followed by one `key = value` line per field.
  void write_section(std::ostream& out) const;
  /// Reads keys T, beta_start, beta_end, total_steps, sawtooth_n. Missing keys
  /// keep their defaults; unknown keys are rejected.
  static ScheduleConfig from_section(const std::map<std::string, std::string>& entries);
};

}  // namespace sawtooth
