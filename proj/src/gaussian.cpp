#include "sawtooth/gaussian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sawtooth {

Eigen::MatrixXd ar1_covariance(std::size_t channels, std::size_t length, double rho, double scale) {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("ar1_covariance: |rho| must be < 1");
  if (!(scale > 0.0)) throw std::invalid_argument("ar1_covariance: scale must be positive");
  if (channels == 0 || length == 0) throw std::invalid_argument("ar1_covariance: empty shape");
  const auto dim = static_cast<Eigen::Index>(channels * length);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  const double var = scale * scale;
  for (std::size_t c = 0; c < channels; ++c) {
    const auto base = static_cast<Eigen::Index>(c * length);
    for (std::size_t i = 0; i < length; ++i) {
      for (std::size_t j = 0; j < length; ++j) {
        const auto lag = static_cast<double>(i > j ? i - j : j - i);
        cov(base + static_cast<Eigen::Index>(i), base + static_cast<Eigen::Index>(j)) =
            var * std::pow(rho, lag);
      }
    }
  }
  return cov;
}

GaussianDataSpec::GaussianDataSpec(TimeSeries mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const auto dim = static_cast<Eigen::Index>(mean_.size());
  if (covariance_.rows() != dim || covariance_.cols() != dim) {
    throw std::invalid_argument("GaussianDataSpec: covariance is " +
                                std::to_string(covariance_.rows()) + "x" +
                                std::to_string(covariance_.cols()) + ", expected " +
                                std::to_string(dim) + "x" + std::to_string(dim));
  }
  if (!covariance_.allFinite()) throw std::invalid_argument("GaussianDataSpec: non-finite covariance");
  const double asym = (covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * (1.0 + covariance_.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("GaussianDataSpec: covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("GaussianDataSpec: covariance is not positive definite");
  }
  cholesky_ = llt.matrixL();
}

GaussianDataSpec GaussianDataSpec::ar1(TimeSeries mean, double rho, double scale) {
  auto cov = ar1_covariance(mean.channels(), mean.length(), rho, scale);
  return GaussianDataSpec(std::move(mean), std::move(cov));
}

TimeSeries GaussianDataSpec::draw(Rng& rng) const {
  auto z = standard_normal(mean_.channels(), mean_.length(), rng);
  const auto dim = static_cast<Eigen::Index>(mean_.size());
  Eigen::Map<const Eigen::VectorXd> zv(z.values().data(), dim);
  Eigen::Map<const Eigen::VectorXd> mu(mean_.values().data(), dim);
  Eigen::VectorXd x = mu + cholesky_.triangularView<Eigen::Lower>() * zv;
  return TimeSeries(mean_.channels(), mean_.length(), std::vector<double>(x.data(), x.data() + dim));
}

}  // namespace sawtooth
