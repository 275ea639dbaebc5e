#include "sawtooth/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>

#include "sawtooth/data.hpp"
#include "sawtooth/denoiser.hpp"
#include "sawtooth/evaluation.hpp"
#include "sawtooth/gradcheck.hpp"
#include "sawtooth/predictor.hpp"
#include "sawtooth/sampler.hpp"
#include "sawtooth/schedule.hpp"
#include "sawtooth/seeds.hpp"
#include "sawtooth/text_io.hpp"

namespace sawtooth {

namespace {

constexpr long long kMaxCount = 1'000'000;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t master_seed(RunConfig& cfg) { return cfg.get_seed("run.seed", 0); }

std::size_t thread_count(RunConfig& cfg) {
  return static_cast<std::size_t>(cfg.get_int("run.threads", 1, 1, 256));
}

std::optional<ScheduleConfig> read_schedule(RunConfig& cfg) {
  try {
    auto sc = ScheduleConfig::from_section(cfg.section("schedule"));
    sc.validate();
    return sc;
  } catch (const std::invalid_argument& e) {
    cfg.add_violation(std::string("schedule: ") + e.what());
    return std::nullopt;
  }
}

struct OracleSettings {
  std::size_t channels = 2;
  std::size_t length = 16;
  double rho = 0.9;
  double scale = 1.0;
  std::string mean = "sine";
};

OracleSettings read_oracle(RunConfig& cfg) {
  OracleSettings s;
  s.channels = static_cast<std::size_t>(cfg.get_int("oracle.channels", 2, 1, 64));
  s.length = static_cast<std::size_t>(cfg.get_int("oracle.length", 16, 2, 1024));
  s.rho = cfg.get_double("oracle.rho", 0.9, -0.999, 0.999);
  s.scale = cfg.get_double("oracle.scale", 1.0, 1e-6, 1e6);
  s.mean = cfg.get_choice("oracle.mean", "sine", {"zero", "sine"});
  return s;
}

GaussianDataSpec build_oracle_spec(const OracleSettings& s) {
  TimeSeries mu(s.channels, s.length);
  if (s.mean == "sine") {
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t i = 0; i < s.length; ++i) {
        mu(c, i) = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(s.length) + static_cast<double>(c));
      }
    }
  }
  return GaussianDataSpec::ar1(std::move(mu), s.rho, s.scale);
}

DenoiserArchitecture read_architecture(RunConfig& cfg) {
  DenoiserArchitecture arch;
  arch.hidden = static_cast<std::size_t>(cfg.get_int("model.hidden", 64, 1, 4096));
  arch.time_features = static_cast<std::size_t>(cfg.get_int("model.time_features", 16, 2, 256));
  if (arch.time_features % 2 != 0) cfg.add_violation("model.time_features: must be even");
  arch.activation = activation_from_string(cfg.get_choice("model.activation", "tanh", {"tanh", "identity"}));
  return arch;
}

std::filesystem::path require_path(RunConfig& cfg, const std::string& key) {
  return std::filesystem::path(cfg.require_string(key));
}

void check_input(RunConfig& cfg, const std::string& key, const std::filesystem::path& path) {
  if (!path.empty() && !std::filesystem::exists(path)) {
    cfg.add_violation(key + ": file not found: " + path.string());
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

std::string format_ratio(double value) {
  auto text = format_double(value);
  if (text.find_first_of(".eEn") == std::string::npos) text += ".0";
  return text;
}

/// Predictors keyed by class label, from a model bundle or the Gaussian oracle.
struct PredictorSet {
  std::map<int, std::string> names;
  std::map<int, std::unique_ptr<EpsilonPredictor>> predictors;
  std::size_t channels = 0;
  std::size_t length = 0;
};

struct PredictorSettings {
  std::string kind;
  std::filesystem::path model_path;
  OracleSettings oracle;
};

PredictorSettings read_predictor_settings(RunConfig& cfg) {
  PredictorSettings s;
  s.kind = cfg.get_choice("predictor.kind", "model", {"model", "oracle"});
  if (s.kind == "model") {
    s.model_path = require_path(cfg, "predictor.model");
    check_input(cfg, "predictor.model", s.model_path);
  } else {
    s.oracle = read_oracle(cfg);
  }
  return s;
}

PredictorSet load_predictors(const PredictorSettings& s, int steps) {
  PredictorSet set;
  if (s.kind == "oracle") {
    set.channels = s.oracle.channels;
    set.length = s.oracle.length;
    set.names[0] = "gaussian";
    set.predictors[0] = std::make_unique<GaussianOracle>(build_oracle_spec(s.oracle));
    return set;
  }
  std::ifstream in(s.model_path);
  if (!in) throw InputError("cannot open model file " + s.model_path.string());
  std::vector<ClassDenoiser> bundle;
  try {
    bundle = read_model_bundle(in);
  } catch (const std::exception& e) {
    throw InputError(s.model_path.string() + ": " + e.what());
  }
  for (auto& member : bundle) {
    const auto& arch = member.model.architecture();
    if (arch.diffusion_steps != steps) {
      throw InputError("model file " + s.model_path.string() + " was trained with T = " +
                               std::to_string(arch.diffusion_steps) + " but schedule.T = " +
                               std::to_string(steps));
    }
    set.channels = arch.channels;
    set.length = arch.length;
    set.names[member.label] = member.name;
    set.predictors[member.label] = std::make_unique<Denoiser>(std::move(member.model));
  }
  return set;
}

struct SamplerSettings {
  SamplerMethod method = SamplerMethod::sawtooth;
  double eta = 0.0;
  std::size_t count = 1;
};

SamplerSettings read_sampler(RunConfig& cfg, const std::optional<ScheduleConfig>& schedule,
                             std::size_t default_count) {
  SamplerSettings s;
  s.method = sampler_method_from_string(
      cfg.get_choice("sampler.method", "sawtooth", {"ddpm", "ddim", "sawtooth"}));
  s.count = static_cast<std::size_t>(
      cfg.get_int("sampler.count", static_cast<long long>(default_count), 1, kMaxCount));
  if (s.method == SamplerMethod::ddim) {
    s.eta = cfg.get_double("sampler.eta", 0.0, 0.0, 1.0);
  } else if (cfg.has("sampler.eta")) {
    cfg.get_string("sampler.eta", "");
    cfg.add_violation("sampler.eta: only applies to method = ddim");
  }
  if (schedule && s.method != SamplerMethod::sawtooth && schedule->sawtooth_n != 1) {
    cfg.add_violation("schedule.sawtooth_n: must be 1 unless sampler.method = sawtooth");
  }
  return s;
}

SamplingPlan plan_for(const SamplerSettings& s, const ScheduleConfig& sc, const SawtoothSetup& setup) {
  if (s.method == SamplerMethod::ddim) return make_ddim_plan(sc.steps, sc.total_steps);
  return setup.plan;
}

std::vector<Trajectory> sample_class(const SamplerSettings& s, const EpsilonPredictor& predictor,
                                     const PredictorSet& set, const SawtoothSetup& setup,
                                     const SamplingPlan& plan, std::uint64_t seed,
                                     std::size_t threads, bool record) {
  BatchRequest request;
  request.method = s.method;
  request.eta = s.eta;
  request.count = s.count;
  request.channels = set.channels;
  request.length = set.length;
  request.seed = seed;
  request.threads = threads;
  request.options.record_states = record;
  return sample_batch(request, predictor, setup.schedule, plan);
}

}  // namespace

CommandOutput cmd_gen_data(RunConfig& cfg) {
  const auto seed = derive_seed(master_seed(cfg), "gen-data");
  const auto kind = cfg.get_choice("data.kind", "cyclic", {"cyclic", "imbalanced", "gaussian"});
  CyclicOptions cyclic;
  ImbalancedOptions imbalanced;
  OracleSettings oracle;
  std::size_t gaussian_count = 0;
  if (kind == "cyclic") {
    cyclic.n_classes = static_cast<std::size_t>(cfg.get_int("data.n_classes", 4, 2, 64));
    cyclic.channels = static_cast<std::size_t>(cfg.get_int("data.channels", 3, 1, 64));
    cyclic.length = static_cast<std::size_t>(cfg.get_int("data.length", 64, 2, 65536));
    cyclic.per_class = static_cast<std::size_t>(cfg.get_int("data.per_class", 20, 1, kMaxCount));
    cyclic.noise_level = cfg.get_double("data.noise_level", 0.1, 0.0, 1e6);
    cyclic.seed = seed;
  } else if (kind == "imbalanced") {
    imbalanced.minority_fraction = cfg.get_double("data.minority_fraction", 0.1, 0.0, 0.5);
    imbalanced.total = static_cast<std::size_t>(cfg.get_int("data.total", 100, 2, kMaxCount));
    imbalanced.channels = static_cast<std::size_t>(cfg.get_int("data.channels", 3, 1, 64));
    imbalanced.length = static_cast<std::size_t>(cfg.get_int("data.length", 64, 2, 65536));
    imbalanced.noise_level = cfg.get_double("data.noise_level", 0.1, 0.0, 1e6);
    imbalanced.seed = seed;
  } else {
    gaussian_count = static_cast<std::size_t>(cfg.get_int("data.count", 100, 1, kMaxCount));
    oracle = read_oracle(cfg);
  }
  const auto out_path = require_path(cfg, "output.dataset");
  cfg.finish();

  LabeledDataset ds;
  try {
    if (kind == "cyclic") {
      ds = gen_cyclic_classes(cyclic);
    } else if (kind == "imbalanced") {
      ds = gen_imbalanced(imbalanced);
    } else {
      ds = gen_gaussian(build_oracle_spec(oracle), gaussian_count, seed);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError({std::string("data: ") + e.what()});
  }
  save_csv(ds, out_path);
  return {{out_path}, {{"samples", static_cast<double>(ds.size())}}};
}

CommandOutput cmd_train(RunConfig& cfg) {
  const auto seed = derive_seed(master_seed(cfg), "train");
  const auto schedule = read_schedule(cfg);
  const auto input = require_path(cfg, "data.input");
  check_input(cfg, "data.input", input);
  auto arch = read_architecture(cfg);
  TrainingOptions opts;
  opts.steps = static_cast<int>(cfg.get_int("train.steps", 2000, 0, 100'000'000));
  opts.learning_rate = cfg.get_double("train.learning_rate", 0.05, 1e-12, 1e3);
  opts.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch_size", 32, 1, 1 << 16));
  const auto model_path = require_path(cfg, "output.model");
  const auto log_path = require_path(cfg, "output.loss_log");
  cfg.finish();

  const auto ds = load_csv(input);
  const auto setup = schedule->build();
  arch.channels = ds.samples.front().channels();
  arch.length = ds.samples.front().length();
  arch.diffusion_steps = schedule->steps;

  std::vector<ClassDenoiser> bundle;
  std::vector<std::pair<int, TrainingLog>> logs;
  CommandOutput result;
  for (const auto& [label, name] : ds.class_names) {
    const auto samples = ds.samples_of(label);
    const auto class_seed = derive_seed(seed, static_cast<std::uint64_t>(label));
    auto model = Denoiser::random(arch, derive_seed(class_seed, "init"));
    opts.seed = derive_seed(class_seed, "sgd");
    auto log = train(model, samples, setup.schedule, opts);
    if (!log.losses.empty()) {
      result.metrics["final_loss." + std::to_string(label)] = log.losses.back();
    }
    logs.emplace_back(label, std::move(log));
    bundle.push_back({label, name, std::move(model)});
  }

  write_file_atomically(model_path, [&](std::ostream& out) { write_model_bundle(out, bundle); });
  write_file_atomically(log_path, [&](std::ostream& out) {
    out << "#sawtooth-losslog v1\nclass,step,loss\n";
    for (const auto& [label, log] : logs) {
      for (std::size_t i = 0; i < log.losses.size(); ++i) {
        out << label << ',' << i << ',' << format_double(log.losses[i]) << '\n';
      }
    }
  });
  result.files = {model_path, log_path};
  return result;
}

CommandOutput cmd_sample(RunConfig& cfg) {
  const auto seed = derive_seed(master_seed(cfg), "sample");
  const auto threads = thread_count(cfg);
  const auto schedule = read_schedule(cfg);
  const auto sampler = read_sampler(cfg, schedule, 8);
  const auto predictor = read_predictor_settings(cfg);
  const auto samples_path = require_path(cfg, "output.samples");
  const auto trajectory_path = require_path(cfg, "output.trajectory");
  cfg.finish();

  const auto setup = schedule->build();
  const auto plan = plan_for(sampler, *schedule, setup);
  const auto set = load_predictors(predictor, schedule->steps);

  LabeledDataset generated;
  generated.class_names = set.names;
  std::vector<Trajectory> all;
  for (const auto& [label, model] : set.predictors) {
    auto trajectories = sample_class(sampler, *model, set, setup, plan,
                                     derive_seed(seed, static_cast<std::uint64_t>(label)), threads, true);
    for (auto& tr : trajectories) {
      generated.samples.push_back(tr.final_state);
      generated.labels.push_back(label);
      all.push_back(std::move(tr));
    }
  }

  save_csv(generated, samples_path);
  write_file_atomically(trajectory_path, [&](std::ostream& out) { write_trajectories(out, all); });
  return {{samples_path, trajectory_path},
          {{"samples", static_cast<double>(generated.size())},
           {"nfe_per_sample", static_cast<double>(all.front().nfe)}}};
}

CommandOutput cmd_eval_curve(RunConfig& cfg) {
  const auto seed = derive_seed(master_seed(cfg), "eval-curve");
  const auto threads = thread_count(cfg);
  const auto schedule = read_schedule(cfg);
  const auto sampler = read_sampler(cfg, schedule, 1);
  const auto predictor = read_predictor_settings(cfg);
  const auto real_path = require_path(cfg, "data.real");
  check_input(cfg, "data.real", real_path);
  const auto prefix = cfg.require_string("output.curve_prefix");
  cfg.finish();

  const auto setup = schedule->build();
  const auto plan = plan_for(sampler, *schedule, setup);
  const auto set = load_predictors(predictor, schedule->steps);
  const auto real = load_csv(real_path);

  struct Curve {
    std::filesystem::path path;
    StepCurve curve;
  };
  std::vector<Curve> curves;
  double final_sum = 0.0;
  for (const auto& [label, model] : set.predictors) {
    // Oracle samples are matched against the whole real set; class models
    // against real sequences of their own class.
    auto reference = predictor.kind == "oracle" ? real.samples : real.samples_of(label);
    if (reference.empty()) {
      throw InputError("data.real has no samples of class " + std::to_string(label));
    }
    const auto trajectories = sample_class(sampler, *model, set, setup, plan,
                                           derive_seed(seed, static_cast<std::uint64_t>(label)),
                                           threads, true);
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      auto curve = per_step_curve(trajectories[i], reference);
      if (!curve.empty()) final_sum += curve.back().score;
      curves.push_back({prefix + "_class" + std::to_string(label) + "_sample" + std::to_string(i) + ".csv",
                        std::move(curve)});
    }
  }

  CommandOutput result;
  for (const auto& c : curves) {
    write_file_atomically(c.path, [&](std::ostream& out) { write_step_curve(out, c.curve); });
    result.files.push_back(c.path);
  }
  result.metrics["curves"] = static_cast<double>(curves.size());
  result.metrics["mean_final_score"] = final_sum / static_cast<double>(curves.size());
  return result;
}

CommandOutput cmd_tstr(RunConfig& cfg) {
  const auto synthetic_path = require_path(cfg, "data.synthetic");
  check_input(cfg, "data.synthetic", synthetic_path);
  const auto real_path = require_path(cfg, "data.real");
  check_input(cfg, "data.real", real_path);
  const auto report_path = require_path(cfg, "output.report");
  cfg.finish();

  const auto synthetic = load_csv(synthetic_path);
  const auto real = load_csv(real_path);
  const auto metrics = tstr_evaluate(synthetic, real);
  const double chance = 1.0 / static_cast<double>(metrics.labels.size());
  write_file_atomically(report_path, [&](std::ostream& out) {
    out << "#sawtooth-tstr v1\n";
    write_tstr_summary(out, metrics);
    out << "chance = " << format_double(chance) << "\n"
        << "margin_over_chance = " << format_double(metrics.macro_f1 - chance) << "\n";
  });
  return {{report_path},
          {{"macro_f1", metrics.macro_f1}, {"gmean", metrics.gmean}, {"chance", chance}}};
}

CommandOutput cmd_bench(RunConfig& cfg) {
  const auto seed = derive_seed(master_seed(cfg), "bench");
  const auto schedule = read_schedule(cfg);
  const auto count = static_cast<std::size_t>(cfg.get_int("bench.count", 4, 1, kMaxCount));
  auto arch = read_architecture(cfg);
  arch.channels = static_cast<std::size_t>(cfg.get_int("bench.channels", 3, 1, 64));
  arch.length = static_cast<std::size_t>(cfg.get_int("bench.length", 64, 1, 65536));
  const auto report_path = require_path(cfg, "output.report");
  cfg.finish();

  const auto setup = schedule->build();
  arch.diffusion_steps = schedule->steps;
  const auto model = Denoiser::random(arch, derive_seed(seed, "model"));

  BatchRequest request;
  request.count = count;
  request.channels = arch.channels;
  request.length = arch.length;
  request.seed = derive_seed(seed, "x_T");
  request.options.record_states = false;

  auto timed = [&](SamplerMethod method) {
    request.method = method;
    const auto start = std::chrono::steady_clock::now();
    auto trajectories = sample_batch(request, model, setup.schedule, setup.plan);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return std::make_pair(count_nfe(trajectories.front()), elapsed.count());
  };
  const auto [nfe_ddpm, ddpm_seconds] = timed(SamplerMethod::ddpm);
  const auto [nfe_saw, saw_seconds] = timed(SamplerMethod::sawtooth);
  const double nfe_ratio = static_cast<double>(nfe_ddpm) / static_cast<double>(nfe_saw);
  const double wall_ratio = saw_seconds > 0.0 ? ddpm_seconds / saw_seconds : kInf;

  write_file_atomically(report_path, [&](std::ostream& out) {
    out << "#sawtooth-bench v1\n"
        << "# generated_at = " << timestamp() << "\n"
        << "# ddpm_seconds = " << format_double(ddpm_seconds) << "\n"
        << "# sawtooth_seconds = " << format_double(saw_seconds) << "\n"
        << "# wall_ratio = " << format_double(wall_ratio) << "\n"
        << "[bench]\n"
        << "T = " << schedule->steps << "\n"
        << "total_steps = " << schedule->total_steps << "\n"
        << "sawtooth_n = " << schedule->sawtooth_n << "\n"
        << "samples = " << count << "\n"
        << "nfe_ddpm = " << nfe_ddpm << "\n"
        << "nfe_sawtooth = " << nfe_saw << "\n"
        << "nfe_ratio = " << format_ratio(nfe_ratio) << "\n";
  });
  return {{report_path},
          {{"nfe_ddpm", static_cast<double>(nfe_ddpm)},
           {"nfe_sawtooth", static_cast<double>(nfe_saw)},
           {"nfe_ratio", nfe_ratio},
           {"ddpm_seconds", ddpm_seconds},
           {"sawtooth_seconds", saw_seconds},
           {"wall_ratio", wall_ratio}}};
}

CommandOutput cmd_gradcheck(RunConfig& cfg) {
  const auto seed = derive_seed(master_seed(cfg), "gradcheck");
  const auto models = static_cast<std::size_t>(cfg.get_int("gradcheck.models", 5, 1, 1000));
  const auto probes = static_cast<std::size_t>(cfg.get_int("gradcheck.probes", 10, 1, 1000));
  const double step = cfg.get_double("gradcheck.fd_step", 1e-5, 1e-10, 1e-1);
  const double threshold = cfg.get_double("gradcheck.threshold", 1e-4, 0.0, 1.0);
  DenoiserArchitecture arch;
  arch.channels = static_cast<std::size_t>(cfg.get_int("gradcheck.channels", 2, 1, 16));
  arch.length = static_cast<std::size_t>(cfg.get_int("gradcheck.length", 6, 1, 256));
  arch.hidden = static_cast<std::size_t>(cfg.get_int("gradcheck.hidden", 8, 1, 256));
  arch.time_features = static_cast<std::size_t>(cfg.get_int("gradcheck.time_features", 4, 2, 64));
  if (arch.time_features % 2 != 0) cfg.add_violation("gradcheck.time_features: must be even");
  arch.diffusion_steps = static_cast<int>(cfg.get_int("gradcheck.T", 100, 1, 100000));
  arch.activation =
      activation_from_string(cfg.get_choice("gradcheck.activation", "tanh", {"tanh", "identity"}));
  const auto report_path = require_path(cfg, "output.report");
  cfg.finish();

  double worst = 0.0;
  std::size_t parameters = 0;
  for (std::size_t m = 0; m < models; ++m) {
    const auto model_seed = derive_seed(seed, static_cast<std::uint64_t>(m));
    // Non-zero biases so every parameter block carries signal.
    auto model = Denoiser::random(arch, model_seed);
    auto params = model.parameters();
    Rng rng(derive_seed(model_seed, "bias"));
    std::normal_distribution<double> normal(0.0, 0.3);
    for (auto* bias : {&params.b_in, &params.b_hidden, &params.b_out})
      for (Eigen::Index i = 0; i < bias->size(); ++i) (*bias)(i) = normal(rng);
    model.set_parameters(std::move(params));
    const auto r = check_gradients(model, probes, step, derive_seed(model_seed, "probes"));
    worst = std::max(worst, r.max_relative_error);
    parameters += r.parameters;
  }
  const bool pass = worst < threshold;
  write_file_atomically(report_path, [&](std::ostream& out) {
    out << "#sawtooth-gradcheck v1\n"
        << "[gradcheck]\n"
        << "models = " << models << "\n"
        << "probes = " << probes << "\n"
        << "parameters = " << parameters << "\n"
        << "fd_step = " << format_double(step) << "\n"
        << "max_rel_err = " << format_double(worst) << "\n"
        << "threshold = " << format_double(threshold) << "\n"
        << "pass = " << (pass ? "true" : "false") << "\n";
  });
  return {{report_path}, {{"max_rel_err", worst}, {"pass", pass ? 1.0 : 0.0}}};
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gen-data", "train", "sample", "eval-curve",
                                                 "tstr",     "bench", "gradcheck"};
  return names;
}

CommandOutput run_command(const std::string& name, RunConfig& config) {
  static const std::map<std::string, std::function<CommandOutput(RunConfig&)>> table = {
      {"gen-data", cmd_gen_data}, {"train", cmd_train}, {"sample", cmd_sample},
      {"eval-curve", cmd_eval_curve}, {"tstr", cmd_tstr}, {"bench", cmd_bench},
      {"gradcheck", cmd_gradcheck}};
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError({"unknown command '" + name + "'"});
  const auto declared = config.get_string("run.command", name);
  if (declared != name) {
    config.add_violation("run.command: config is for '" + declared + "', invoked as '" + name + "'");
  }
  return it->second(config);
}

std::string format_error_line(const std::string& kind, const std::string& message) {
  std::string clean;
  clean.reserve(message.size());
  for (char c : message) {
    if (c == '\n' || c == '\r') {
      clean += ' ';
    } else if (c == '"') {
      clean += '\'';
    } else {
      clean += c;
    }
  }
  return "error kind=" + kind + " message=\"" + clean + "\"";
}

}  // namespace sawtooth
