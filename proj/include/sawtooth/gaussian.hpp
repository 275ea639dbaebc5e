#pragma once

#include <Eigen/Dense>

#include "sawtooth/seeds.hpp"
#include "sawtooth/time_series.hpp"

namespace sawtooth {

/// Per-channel stationary AR(1) covariance over the flattened
/// (channel-major) layout: cov(c,i ; c,j) = scale^2 * rho^|i-j|, with
/// channels independent of each other.
Eigen::MatrixXd ar1_covariance(std::size_t channels, std::size_t length, double rho, double scale);

/// N(mu, C) over flattened time series. C must be symmetric positive definite.
class GaussianDataSpec {
 public:
  GaussianDataSpec(TimeSeries mean, Eigen::MatrixXd covariance);

  static GaussianDataSpec ar1(TimeSeries mean, double rho, double scale);

  const TimeSeries& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
  /// Lower-triangular L with C = L L^T.
  const Eigen::MatrixXd& cholesky_factor() const noexcept { return cholesky_; }
  std::size_t dimension() const noexcept { return mean_.size(); }

  /// mu + L z with z standard normal.
  TimeSeries draw(Rng& rng) const;

 private:
  TimeSeries mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd cholesky_;
};

}  // namespace sawtooth
