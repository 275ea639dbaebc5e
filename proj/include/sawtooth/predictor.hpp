#pragma once

#include <Eigen/Dense>

#include "sawtooth/gaussian.hpp"
#include "sawtooth/schedule.hpp"
#include "sawtooth/time_series.hpp"

namespace sawtooth {

/// Estimates the standard-normal noise component of a noisy state x_t.
/// Implementations must be shape-preserving and safe to call concurrently.
class EpsilonPredictor {
 public:
  virtual ~EpsilonPredictor() = default;
  virtual TimeSeries predict(const TimeSeries& x_t, int t, const NoiseSchedule& schedule) const = 0;
};

/// Exact MMSE predictor for data drawn from a GaussianDataSpec.
///
/// With x_t = sqrt(ab) x0 + sqrt(1-ab) eps and x0 ~ N(mu, C):
///   E[x0 | x_t] = mu + sqrt(ab) C (ab C + (1-ab) I)^{-1} (x_t - sqrt(ab) mu)
///   eps_hat     = (x_t - sqrt(ab) E[x0 | x_t]) / sqrt(1 - ab)
/// C is diagonalized once, so each call costs two dense mat-vecs.
class GaussianOracle final : public EpsilonPredictor {
 public:
  explicit GaussianOracle(GaussianDataSpec spec);

  TimeSeries predict(const TimeSeries& x_t, int t, const NoiseSchedule& schedule) const override;
  /// Same estimate for an explicit alpha_bar in (0, 1).
  TimeSeries predict_at(const TimeSeries& x_t, double alpha_bar) const;
  TimeSeries posterior_mean(const TimeSeries& x_t, double alpha_bar) const;

  /// Expected per-coordinate squared error E|eps - eps_hat|^2 / D of the oracle.
  double expected_mse(double alpha_bar) const;

  const GaussianDataSpec& spec() const noexcept { return spec_; }

 private:
  GaussianDataSpec spec_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd eigenvalues_;
};

TimeSeries oracle_predict(const TimeSeries& x_t, int t, const NoiseSchedule& schedule,
                          const GaussianDataSpec& spec);

/// Test double: always answers with the stored noise.
class GroundTruthPredictor final : public EpsilonPredictor {
 public:
  explicit GroundTruthPredictor(TimeSeries stored_eps) : eps_(std::move(stored_eps)) {}

  TimeSeries predict(const TimeSeries& x_t, int t, const NoiseSchedule& schedule) const override;

 private:
  TimeSeries eps_;
};

}  // namespace sawtooth
