#include "sawtooth/forward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sawtooth {

TimeSeries diffuse_with_alpha_bar(const TimeSeries& x0, double alpha_bar, const TimeSeries& eps) {
  require_same_shape(x0, eps, "diffuse");
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw std::invalid_argument("diffuse: alpha_bar outside [0, 1]");
  }
  return linear_combination(std::sqrt(alpha_bar), x0, std::sqrt(1.0 - alpha_bar), eps);
}

TimeSeries diffuse(const TimeSeries& x0, int t, const TimeSeries& eps,
                   const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) {
    throw std::out_of_range("diffuse: step " + std::to_string(t) + " outside 1.." +
                            std::to_string(schedule.steps()));
  }
  return diffuse_with_alpha_bar(x0, schedule.alpha_bar(t), eps);
}

}  // namespace sawtooth
