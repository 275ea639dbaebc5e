#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sawtooth {

/// Fixed-shape multichannel sequence. Values are stored channel-major, so the
/// flattened index of (channel c, sample i) is c * length + i.
class TimeSeries {
 public:
  /// Zero-filled series. Both dimensions must be positive.
  TimeSeries(std::size_t channels, std::size_t length);

  /// Takes ownership of `values`; throws if the size does not match the shape
  /// or any value is non-finite.
  TimeSeries(std::size_t channels, std::size_t length, std::vector<double> values);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t channel, std::size_t index) {
    return values_[channel * length_ + index];
  }
  double operator()(std::size_t channel, std::size_t index) const {
    return values_[channel * length_ + index];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> channel(std::size_t c) const;

  bool same_shape(const TimeSeries& other) const noexcept {
    return channels_ == other.channels_ && length_ == other.length_;
  }
  bool all_finite() const noexcept;

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::size_t channels_;
  std::size_t length_;
  std::vector<double> values_;
};

/// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const TimeSeries& a, const TimeSeries& b, const char* what);

/// a * x + b * y, elementwise.
TimeSeries linear_combination(double a, const TimeSeries& x, double b, const TimeSeries& y);

double max_abs_difference(const TimeSeries& a, const TimeSeries& b);

}  // namespace sawtooth
