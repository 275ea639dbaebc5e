#include "sawtooth/schedule.hpp"

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

#include "sawtooth/text_io.hpp"

namespace sawtooth {

namespace {

void check_step_index(int t, int lo, int hi, const char* what) {
  if (t < lo || t > hi) {
    throw std::out_of_range(std::string(what) + ": step " + std::to_string(t) +
                            " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

std::string beta_range_error(int steps, double beta_start, double beta_end) {
  std::string err;
  auto add = [&](const std::string& msg) {
    if (!err.empty()) err += "; ";
    err += msg;
  };
  if (steps < 1) add("T must be >= 1 (got " + std::to_string(steps) + ")");
  if (!(beta_start > 0.0 && beta_start < 1.0))
    add("beta_start must lie in (0, 1) (got " + format_double(beta_start) + ")");
  if (!(beta_end > 0.0 && beta_end < 1.0))
    add("beta_end must lie in (0, 1) (got " + format_double(beta_end) + ")");
  if (beta_start > beta_end)
    add("beta_start " + format_double(beta_start) + " exceeds beta_end " + format_double(beta_end));
  return err;
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("NoiseSchedule: no steps");
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw std::invalid_argument("NoiseSchedule: beta[" + std::to_string(i + 1) + "] = " +
                                  format_double(b) + " outside (0, 1)");
    }
    alphas_.push_back(1.0 - b);
    running *= alphas_.back();
    alpha_bars_.push_back(running);
  }
  if (!(alpha_bars_.back() > 0.0)) {
    throw std::invalid_argument("NoiseSchedule: alpha_bar underflows to zero");
  }
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::beta(int t) const {
  check_step_index(t, 1, steps(), "NoiseSchedule::beta");
  return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const {
  check_step_index(t, 1, steps(), "NoiseSchedule::alpha");
  return alphas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_step_index(t, 0, steps(), "NoiseSchedule::alpha_bar");
  return t == 0 ? 1.0 : alpha_bars_[static_cast<std::size_t>(t - 1)];
}

SamplingPlan::SamplingPlan(int total_diffusion_steps, std::vector<int> taus, int iterations)
    : diffusion_steps_(total_diffusion_steps), taus_(std::move(taus)), iterations_(iterations) {
  if (iterations_ < 1) {
    throw std::invalid_argument("SamplingPlan: iterations must be >= 1 (got " +
                                std::to_string(iterations_) + ")");
  }
  if (taus_.empty()) throw std::invalid_argument("SamplingPlan: empty subsequence");
  for (std::size_t i = 0; i < taus_.size(); ++i) {
    if (taus_[i] < 1 || taus_[i] > diffusion_steps_) {
      throw std::invalid_argument("SamplingPlan: tau " + std::to_string(taus_[i]) +
                                  " outside 1.." + std::to_string(diffusion_steps_));
    }
    if (i > 0 && taus_[i] <= taus_[i - 1]) {
      throw std::invalid_argument("SamplingPlan: subsequence not strictly increasing at position " +
                                  std::to_string(i));
    }
  }
  if (taus_.back() != diffusion_steps_) {
    throw std::invalid_argument("SamplingPlan: last tau must equal T = " +
                                std::to_string(diffusion_steps_));
  }
}

std::vector<double> linear_betas(int steps, double beta_start, double beta_end) {
  if (auto err = beta_range_error(steps, beta_start, beta_end); !err.empty()) {
    throw std::invalid_argument("linear_betas: " + err);
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  if (steps == 1) {
    betas[0] = beta_start;
    return betas;
  }
  const double span = beta_end - beta_start;
  const double last = steps - 1;
  for (int i = 0; i < steps; ++i) {
    betas[static_cast<std::size_t>(i)] = beta_start + span * (i / last);
  }
  betas.back() = beta_end;
  return betas;
}

NoiseSchedule build_schedule(int steps, double beta_start, double beta_end) {
  return NoiseSchedule::from_betas(linear_betas(steps, beta_start, beta_end));
}

std::vector<int> select_subsequence(int steps, int count) {
  if (steps < 1) throw std::invalid_argument("select_subsequence: T must be >= 1");
  if (count < 1 || count > steps) {
    throw std::invalid_argument("select_subsequence: S = " + std::to_string(count) +
                                " must lie in 1..T = " + std::to_string(steps));
  }
  std::vector<int> taus;
  taus.reserve(static_cast<std::size_t>(count));
  const long long t = steps;
  const long long s = count;
  for (long long i = 1; i <= s; ++i) {
    taus.push_back(static_cast<int>((2 * i * t + s) / (2 * s)));
  }
  return taus;
}

SamplingPlan make_ddim_plan(int steps, int count) {
  return SamplingPlan(steps, select_subsequence(steps, count), 1);
}

SawtoothSetup build_sawtooth_plan(int total_steps, int iterations, int steps, double beta_start,
                                  double beta_end) {
  if (iterations < 1) {
    throw std::invalid_argument("build_sawtooth_plan: N must be >= 1 (got " +
                                std::to_string(iterations) + ")");
  }
  if (total_steps < 1 || total_steps % iterations != 0) {
    throw std::invalid_argument("build_sawtooth_plan: total_steps = " +
                                std::to_string(total_steps) + " is not divisible by N = " +
                                std::to_string(iterations));
  }
  auto schedule = build_schedule(steps, beta_start, beta_end);
  const int per_iteration = total_steps / iterations;
  SamplingPlan plan(steps, select_subsequence(steps, per_iteration), iterations);
  return {std::move(schedule), std::move(plan)};
}

void ScheduleConfig::validate() const {
  std::string err = beta_range_error(steps, beta_start, beta_end);
  auto add = [&](const std::string& msg) {
    if (!err.empty()) err += "; ";
    err += msg;
  };
  if (sawtooth_n < 1) add("sawtooth_n must be >= 1 (got " + std::to_string(sawtooth_n) + ")");
  if (total_steps < 1) add("total_steps must be >= 1 (got " + std::to_string(total_steps) + ")");
  if (sawtooth_n >= 1 && total_steps >= 1) {
    if (total_steps % sawtooth_n != 0) {
      add("total_steps = " + std::to_string(total_steps) + " is not divisible by sawtooth_n = " +
          std::to_string(sawtooth_n));
    } else if (steps >= 1 && total_steps / sawtooth_n > steps) {
      add("steps per iteration " + std::to_string(total_steps / sawtooth_n) + " exceeds T = " +
          std::to_string(steps));
    }
  }
  if (!err.empty()) throw std::invalid_argument(err);
}

SawtoothSetup ScheduleConfig::build() const {
  validate();
  return build_sawtooth_plan(total_steps, sawtooth_n, steps, beta_start, beta_end);
}

void ScheduleConfig::write_section(std::ostream& out) const {
  out << "[schedule]\n"
      << "T = " << steps << "\n"
      << "beta_start = " << format_double(beta_start) << "\n"
      << "beta_end = " << format_double(beta_end) << "\n"
      << "total_steps = " << total_steps << "\n"
      << "sawtooth_n = " << sawtooth_n << "\n";
}

ScheduleConfig ScheduleConfig::from_section(const std::map<std::string, std::string>& entries) {
  ScheduleConfig cfg;
  std::string err;
  auto add = [&](const std::string& msg) {
    if (!err.empty()) err += "; ";
    err += msg;
  };
  for (const auto& [key, value] : entries) {
    if (key == "T" || key == "total_steps" || key == "sawtooth_n") {
      auto v = parse_int(value);
      if (!v || *v < INT32_MIN || *v > INT32_MAX) {
        add(key + ": not an integer: '" + value + "'");
        continue;
      }
      const int iv = static_cast<int>(*v);
      (key == "T" ? cfg.steps : key == "total_steps" ? cfg.total_steps : cfg.sawtooth_n) = iv;
    } else if (key == "beta_start" || key == "beta_end") {
      auto v = parse_double(value);
      if (!v) {
        add(key + ": not a number: '" + value + "'");
        continue;
      }
      (key == "beta_start" ? cfg.beta_start : cfg.beta_end) = *v;
    } else {
      add("unknown key '" + key + "'");
    }
  }
  if (!err.empty()) throw std::invalid_argument(err);
  return cfg;
}

}  // namespace sawtooth
