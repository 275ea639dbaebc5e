#pragma once

#include "sawtooth/schedule.hpp"
#include "sawtooth/time_series.hpp"

namespace sawtooth {

/// Closed-form q(x_t | x_0): sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
/// t must lie in 1..T.
TimeSeries diffuse(const TimeSeries& x0, int t, const TimeSeries& eps,
                   const NoiseSchedule& schedule);

/// Same closed form for an explicit signal-retention factor in [0, 1].
TimeSeries diffuse_with_alpha_bar(const TimeSeries& x0, double alpha_bar, const TimeSeries& eps);

}  // namespace sawtooth
