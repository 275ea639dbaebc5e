#include "sawtooth/time_series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sawtooth {

namespace {

void check_dimensions(std::size_t channels, std::size_t length) {
  if (channels == 0 || length == 0) {
    throw std::invalid_argument("TimeSeries: channels and length must be positive (got " +
                                std::to_string(channels) + "x" + std::to_string(length) + ")");
  }
}

}  // namespace

TimeSeries::TimeSeries(std::size_t channels, std::size_t length)
    : channels_(channels), length_(length) {
  check_dimensions(channels, length);
  values_.assign(channels * length, 0.0);
}

TimeSeries::TimeSeries(std::size_t channels, std::size_t length, std::vector<double> values)
    : channels_(channels), length_(length), values_(std::move(values)) {
  check_dimensions(channels, length);
  if (values_.size() != channels * length) {
    throw std::invalid_argument("TimeSeries: expected " + std::to_string(channels * length) +
                                " values, got " + std::to_string(values_.size()));
  }
  if (!all_finite()) {
    throw std::invalid_argument("TimeSeries: non-finite value");
  }
}

std::span<const double> TimeSeries::channel(std::size_t c) const {
  if (c >= channels_) {
    throw std::out_of_range("TimeSeries: channel " + std::to_string(c) + " out of range");
  }
  return std::span<const double>(values_).subspan(c * length_, length_);
}

bool TimeSeries::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const TimeSeries& a, const TimeSeries& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.channels()) + "x" + std::to_string(a.length()) +
                                " vs " + std::to_string(b.channels()) + "x" +
                                std::to_string(b.length()) + ")");
  }
}

TimeSeries linear_combination(double a, const TimeSeries& x, double b, const TimeSeries& y) {
  require_same_shape(x, y, "linear_combination");
  TimeSeries out(x.channels(), x.length());
  auto xs = x.values();
  auto ys = y.values();
  auto os = out.values();
  for (std::size_t i = 0; i < os.size(); ++i) os[i] = a * xs[i] + b * ys[i];
  return out;
}

double max_abs_difference(const TimeSeries& a, const TimeSeries& b) {
  require_same_shape(a, b, "max_abs_difference");
  double m = 0.0;
  auto as = a.values();
  auto bs = b.values();
  for (std::size_t i = 0; i < as.size(); ++i) m = std::max(m, std::abs(as[i] - bs[i]));
  return m;
}

}  // namespace sawtooth
