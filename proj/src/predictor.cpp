#include "sawtooth/predictor.hpp"

#include <cmath>
#include <stdexcept>

namespace sawtooth {

namespace {

void check_alpha_bar(double alpha_bar) {
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) {
    throw std::invalid_argument("GaussianOracle: alpha_bar must lie in (0, 1)");
  }
}

}  // namespace

GaussianOracle::GaussianOracle(GaussianDataSpec spec) : spec_(std::move(spec)) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(spec_.covariance());
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("GaussianOracle: eigendecomposition failed");
  }
  eigenvectors_ = solver.eigenvectors();
  eigenvalues_ = solver.eigenvalues();
  if (eigenvalues_.minCoeff() <= 0.0) {
    throw std::runtime_error("GaussianOracle: covariance is singular");
  }
}

TimeSeries GaussianOracle::posterior_mean(const TimeSeries& x_t, double alpha_bar) const {
  require_same_shape(x_t, spec_.mean(), "GaussianOracle");
  check_alpha_bar(alpha_bar);
  const auto dim = static_cast<Eigen::Index>(x_t.size());
  const double root_ab = std::sqrt(alpha_bar);
  Eigen::Map<const Eigen::VectorXd> x(x_t.values().data(), dim);
  Eigen::Map<const Eigen::VectorXd> mu(spec_.mean().values().data(), dim);

  // sqrt(ab) C (ab C + (1-ab) I)^{-1} = Q diag(sqrt(ab) l / (ab l + 1 - ab)) Q^T
  const Eigen::VectorXd gain =
      (root_ab * eigenvalues_.array() / (alpha_bar * eigenvalues_.array() + (1.0 - alpha_bar)))
          .matrix();
  Eigen::VectorXd innovation = eigenvectors_.transpose() * (x - root_ab * mu);
  Eigen::VectorXd mean = mu + eigenvectors_ * gain.cwiseProduct(innovation);
  if (!mean.allFinite()) throw std::runtime_error("GaussianOracle: non-finite posterior mean");
  return TimeSeries(x_t.channels(), x_t.length(),
                    std::vector<double>(mean.data(), mean.data() + dim));
}

TimeSeries GaussianOracle::predict_at(const TimeSeries& x_t, double alpha_bar) const {
  const auto x0_hat = posterior_mean(x_t, alpha_bar);
  const double inv = 1.0 / std::sqrt(1.0 - alpha_bar);
  return linear_combination(inv, x_t, -std::sqrt(alpha_bar) * inv, x0_hat);
}

TimeSeries GaussianOracle::predict(const TimeSeries& x_t, int t,
                                   const NoiseSchedule& schedule) const {
  if (t < 1 || t > schedule.steps()) throw std::out_of_range("GaussianOracle: step out of range");
  return predict_at(x_t, schedule.alpha_bar(t));
}

double GaussianOracle::expected_mse(double alpha_bar) const {
  check_alpha_bar(alpha_bar);
  // eps - eps_hat = -sqrt(ab / (1-ab)) (x0 - E[x0 | x_t]); the posterior
  // covariance has eigenvalues l (1-ab) / (ab l + 1 - ab).
  const auto ratio = alpha_bar * eigenvalues_.array() /
                     (alpha_bar * eigenvalues_.array() + (1.0 - alpha_bar));
  return ratio.sum() / static_cast<double>(eigenvalues_.size());
}

TimeSeries oracle_predict(const TimeSeries& x_t, int t, const NoiseSchedule& schedule,
                          const GaussianDataSpec& spec) {
  return GaussianOracle(spec).predict(x_t, t, schedule);
}

TimeSeries GroundTruthPredictor::predict(const TimeSeries& x_t, int /*t*/,
                                         const NoiseSchedule& /*schedule*/) const {
  require_same_shape(x_t, eps_, "GroundTruthPredictor");
  return eps_;
}

}  // namespace sawtooth
