#include "sawtooth/sampler.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>

#include "sawtooth/text_io.hpp"

namespace sawtooth {

namespace {

void check_transition(int tau_cur, int tau_prev, const NoiseSchedule& schedule) {
  if (tau_cur < 1 || tau_cur > schedule.steps()) {
    throw std::out_of_range("ddim_step: tau_cur = " + std::to_string(tau_cur) + " outside 1.." +
                            std::to_string(schedule.steps()));
  }
  if (tau_prev < 0 || tau_prev > tau_cur) {
    throw std::out_of_range("ddim_step: tau_prev = " + std::to_string(tau_prev) +
                            " must lie in 0..tau_cur = " + std::to_string(tau_cur));
  }
}

// sqrt(1 - ab_prev - sigma^2); tolerates round-off just below zero.
double noise_coefficient(double ab_prev, double sigma) {
  double radicand = 1.0 - ab_prev - sigma * sigma;
  if (radicand < 0.0) {
    if (radicand > -1e-14) {
      radicand = 0.0;
    } else {
      throw std::domain_error("ddim_step: negative radicand 1 - alpha_bar_prev - sigma^2 = " +
                              format_double(radicand));
    }
  }
  return std::sqrt(radicand);
}

struct PassContext {
  const EpsilonPredictor& predictor;
  const NoiseSchedule& schedule;
  double eta;
  Rng& rng;
  bool record;
};

// Runs one reverse pass over `taus`, appending transitions labelled with
// `iteration`, and returns the final state.
TimeSeries run_pass(TimeSeries x, const std::vector<int>& taus, int iteration,
                    const PassContext& ctx, Trajectory& trajectory) {
  for (std::size_t i = taus.size(); i-- > 0;) {
    const int tau_cur = taus[i];
    const int tau_prev = i > 0 ? taus[i - 1] : 0;
    TimeSeries eps_hat = [&] {
      try {
        auto out = ctx.predictor.predict(x, tau_cur, ctx.schedule);
        require_same_shape(x, out, "predictor output");
        if (!out.all_finite()) throw std::runtime_error("non-finite prediction");
        return out;
      } catch (const std::exception& e) {
        throw SamplingError("predictor failed at pass " + std::to_string(iteration) + ", step " +
                            std::to_string(tau_cur) + ": " + e.what());
      }
    }();
    ++trajectory.nfe;

    const double sigma = ctx.eta > 0.0 ? sigma_from_eta(ctx.eta, tau_prev, tau_cur, ctx.schedule) : 0.0;
    if (sigma > 0.0) {
      const auto noise = standard_normal(x.channels(), x.length(), ctx.rng);
      x = ddim_step(x, eps_hat, tau_cur, tau_prev, sigma, noise, ctx.schedule);
    } else {
      x = ddim_step(x, eps_hat, tau_cur, tau_prev, ctx.schedule);
    }
    trajectory.steps.push_back({iteration, tau_cur, tau_prev});
    if (ctx.record) trajectory.states.push_back(x);
  }
  return x;
}

Trajectory start_trajectory(const TimeSeries& x_T, const SampleOptions& options) {
  if (!x_T.all_finite()) throw std::invalid_argument("sampler: non-finite initial state");
  Trajectory trajectory(x_T);
  if (options.record_states) trajectory.states.push_back(x_T);
  return trajectory;
}

void check_plan(const SamplingPlan& plan, const NoiseSchedule& schedule) {
  if (plan.diffusion_steps() != schedule.steps()) {
    throw std::invalid_argument("sampler: plan built for T = " + std::to_string(plan.diffusion_steps()) +
                                ", schedule has T = " + std::to_string(schedule.steps()));
  }
}

}  // namespace

double sigma_from_eta(double eta, int tau_prev, int tau_cur, const NoiseSchedule& schedule) {
  if (!(eta >= 0.0)) throw std::invalid_argument("sigma_from_eta: eta must be >= 0");
  if (tau_prev >= tau_cur) {
    throw std::invalid_argument("sigma_from_eta: tau_prev must be below tau_cur");
  }
  const double ab_prev = schedule.alpha_bar(tau_prev);
  const double ab_cur = schedule.alpha_bar(tau_cur);
  if (!(ab_prev > ab_cur)) {
    throw std::logic_error("sigma_from_eta: alpha_bar is not decreasing (corrupt schedule)");
  }
  if (eta == 0.0) return 0.0;
  return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_cur)) * std::sqrt(1.0 - ab_cur / ab_prev);
}

TimeSeries ddim_step(const TimeSeries& x_cur, const TimeSeries& eps_hat, int tau_cur, int tau_prev,
                     const NoiseSchedule& schedule) {
  require_same_shape(x_cur, eps_hat, "ddim_step");
  check_transition(tau_cur, tau_prev, schedule);
  if (tau_prev == tau_cur) return x_cur;
  const double ab_cur = schedule.alpha_bar(tau_cur);
  const double ab_prev = schedule.alpha_bar(tau_prev);
  const double root_cur = std::sqrt(ab_cur);
  const double noise_cur = std::sqrt(1.0 - ab_cur);
  const double root_prev = std::sqrt(ab_prev);
  const double dir = noise_coefficient(ab_prev, 0.0);

  TimeSeries out(x_cur.channels(), x_cur.length());
  const auto x = x_cur.values();
  const auto e = eps_hat.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double x0_hat = (x[i] - noise_cur * e[i]) / root_cur;
    o[i] = root_prev * x0_hat + dir * e[i];
  }
  return out;
}

TimeSeries ddim_step(const TimeSeries& x_cur, const TimeSeries& eps_hat, int tau_cur, int tau_prev,
                     double sigma, const TimeSeries& noise, const NoiseSchedule& schedule) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("ddim_step: sigma must be >= 0");
  if (sigma == 0.0) return ddim_step(x_cur, eps_hat, tau_cur, tau_prev, schedule);
  require_same_shape(x_cur, eps_hat, "ddim_step");
  require_same_shape(x_cur, noise, "ddim_step noise");
  check_transition(tau_cur, tau_prev, schedule);
  const double ab_cur = schedule.alpha_bar(tau_cur);
  const double ab_prev = schedule.alpha_bar(tau_prev);
  const double root_cur = std::sqrt(ab_cur);
  const double noise_cur = std::sqrt(1.0 - ab_cur);
  const double root_prev = std::sqrt(ab_prev);
  const double dir = noise_coefficient(ab_prev, sigma);

  TimeSeries out(x_cur.channels(), x_cur.length());
  const auto x = x_cur.values();
  const auto e = eps_hat.values();
  const auto z = noise.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double x0_hat = (x[i] - noise_cur * e[i]) / root_cur;
    o[i] = root_prev * x0_hat + dir * e[i] + sigma * z[i];
  }
  return out;
}

Trajectory ddim_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const SamplingPlan& plan, const NoiseSchedule& schedule, double eta, Rng& rng,
                       const SampleOptions& options) {
  if (!(eta >= 0.0)) throw std::invalid_argument("ddim_sample: eta must be >= 0");
  check_plan(plan, schedule);
  const auto start = std::chrono::steady_clock::now();
  auto trajectory = start_trajectory(x_T, options);
  PassContext ctx{predictor, schedule, eta, rng, options.record_states};
  trajectory.final_state = run_pass(x_T, plan.taus(), 1, ctx, trajectory);
  trajectory.wall_time = std::chrono::steady_clock::now() - start;
  return trajectory;
}

Trajectory ddim_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const SamplingPlan& plan, const NoiseSchedule& schedule, double eta,
                       std::uint64_t seed, const SampleOptions& options) {
  Rng rng(seed);
  return ddim_sample(x_T, predictor, plan, schedule, eta, rng, options);
}

Trajectory ddpm_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const NoiseSchedule& schedule, Rng& rng, const SampleOptions& options) {
  const auto plan = make_ddim_plan(schedule.steps(), schedule.steps());
  return ddim_sample(x_T, predictor, plan, schedule, 1.0, rng, options);
}

Trajectory ddpm_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                       const NoiseSchedule& schedule, std::uint64_t seed,
                       const SampleOptions& options) {
  Rng rng(seed);
  return ddpm_sample(x_T, predictor, schedule, rng, options);
}

TimeSeries sawtooth_handoff(const TimeSeries& end_of_pass) { return end_of_pass; }

Trajectory sawtooth_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                           const NoiseSchedule& schedule, const SamplingPlan& plan, Rng& rng,
                           const SampleOptions& options) {
  check_plan(plan, schedule);
  const auto start = std::chrono::steady_clock::now();
  auto trajectory = start_trajectory(x_T, options);
  PassContext ctx{predictor, schedule, 0.0, rng, options.record_states};
  TimeSeries x = x_T;
  for (int k = 1; k <= plan.iterations(); ++k) {
    if (k > 1) x = sawtooth_handoff(x);
    x = run_pass(std::move(x), plan.taus(), k, ctx, trajectory);
  }
  trajectory.final_state = std::move(x);
  trajectory.wall_time = std::chrono::steady_clock::now() - start;
  return trajectory;
}

Trajectory sawtooth_sample(const TimeSeries& x_T, const EpsilonPredictor& predictor,
                           const NoiseSchedule& schedule, const SamplingPlan& plan,
                           std::uint64_t seed, const SampleOptions& options) {
  Rng rng(seed);
  return sawtooth_sample(x_T, predictor, schedule, plan, rng, options);
}

std::size_t count_nfe(const Trajectory& trajectory) noexcept { return trajectory.nfe; }

const char* to_string(SamplerMethod method) noexcept {
  switch (method) {
    case SamplerMethod::ddpm: return "ddpm";
    case SamplerMethod::ddim: return "ddim";
    case SamplerMethod::sawtooth: return "sawtooth";
  }
  return "?";
}

SamplerMethod sampler_method_from_string(const std::string& name) {
  if (name == "ddpm") return SamplerMethod::ddpm;
  if (name == "ddim") return SamplerMethod::ddim;
  if (name == "sawtooth") return SamplerMethod::sawtooth;
  throw std::invalid_argument("unknown sampler method '" + name + "' (expected ddpm|ddim|sawtooth)");
}

std::vector<Trajectory> sample_batch(const BatchRequest& request, const EpsilonPredictor& predictor,
                                     const NoiseSchedule& schedule, const SamplingPlan& plan) {
  std::vector<std::optional<Trajectory>> slots(request.count);
  auto run_one = [&](std::size_t i) {
    Rng rng(derive_seed(request.seed, static_cast<std::uint64_t>(i)));
    auto x_T = standard_normal(request.channels, request.length, rng);
    switch (request.method) {
      case SamplerMethod::ddpm:
        slots[i].emplace(ddpm_sample(x_T, predictor, schedule, rng, request.options));
        break;
      case SamplerMethod::ddim:
        slots[i].emplace(ddim_sample(x_T, predictor, plan, schedule, request.eta, rng, request.options));
        break;
      case SamplerMethod::sawtooth:
        slots[i].emplace(sawtooth_sample(x_T, predictor, schedule, plan, rng, request.options));
        break;
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(request.threads, request.count));
  if (threads == 1) {
    for (std::size_t i = 0; i < request.count; ++i) run_one(i);
  } else {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < request.count; i += threads) run_one(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& worker : workers) worker.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<Trajectory> out;
  out.reserve(request.count);
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  out << "#sawtooth-trajectory v1\n"
      << "sample,k,tau_from,tau_to,checksum\n";
  for (std::size_t s = 0; s < trajectories.size(); ++s) {
    const auto& tr = trajectories[s];
    for (std::size_t j = 0; j < tr.steps.size(); ++j) {
      const auto& label = tr.steps[j];
      out << s << ',' << label.iteration << ',' << label.tau_from << ',' << label.tau_to << ',';
      if (tr.recorded()) {
        const auto values = tr.states[j + 1].values();
        out << to_hex(checksum(values.data(), values.size()));
      } else {
        out << '-';
      }
      out << '\n';
    }
  }
}

}  // namespace sawtooth
