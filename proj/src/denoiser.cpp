#include "sawtooth/denoiser.hpp"

#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "sawtooth/forward.hpp"
#include "sawtooth/seeds.hpp"
#include "sawtooth/text_io.hpp"

namespace sawtooth {

namespace {

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& pre, Activation act) {
  return act == Activation::tanh ? Eigen::MatrixXd(pre.array().tanh()) : pre;
}

// Derivative expressed through the post-activation value.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& post, Activation act) {
  if (act == Activation::identity) return Eigen::MatrixXd::Ones(post.rows(), post.cols());
  return (1.0 - post.array().square()).matrix();
}

template <typename Visitor>
void visit_blocks(DenoiserParameters& p, Visitor&& visit) {
  visit(p.w_in.data(), p.w_in.size());
  visit(p.b_in.data(), p.b_in.size());
  visit(p.w_time.data(), p.w_time.size());
  visit(p.w_hidden.data(), p.w_hidden.size());
  visit(p.b_hidden.data(), p.b_hidden.size());
  visit(p.w_out.data(), p.w_out.size());
  visit(p.b_out.data(), p.b_out.size());
}

template <typename Visitor>
void visit_blocks(const DenoiserParameters& p, Visitor&& visit) {
  visit(p.w_in.data(), p.w_in.size());
  visit(p.b_in.data(), p.b_in.size());
  visit(p.w_time.data(), p.w_time.size());
  visit(p.w_hidden.data(), p.w_hidden.size());
  visit(p.b_hidden.data(), p.b_hidden.size());
  visit(p.w_out.data(), p.w_out.size());
  visit(p.b_out.data(), p.b_out.size());
}

std::string read_key(std::istream& in, const std::string& expected) {
  std::string key;
  std::string value;
  if (!(in >> key >> value) || key != expected) {
    throw std::runtime_error("denoiser file: expected '" + expected + "' entry");
  }
  return value;
}

std::size_t read_size(std::istream& in, const std::string& expected) {
  const auto text = read_key(in, expected);
  const auto v = parse_int(text);
  if (!v || *v < 0) throw std::runtime_error("denoiser file: bad value for '" + expected + "'");
  return static_cast<std::size_t>(*v);
}

}  // namespace

const char* to_string(Activation activation) noexcept {
  return activation == Activation::tanh ? "tanh" : "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

void DenoiserArchitecture::validate() const {
  if (channels == 0 || length == 0) throw std::invalid_argument("denoiser: empty input shape");
  if (hidden == 0) throw std::invalid_argument("denoiser: hidden width must be positive");
  if (time_features == 0 || time_features % 2 != 0) {
    throw std::invalid_argument("denoiser: time_features must be a positive even number");
  }
  if (diffusion_steps < 1) throw std::invalid_argument("denoiser: T must be >= 1");
}

DenoiserParameters DenoiserParameters::zeros(const DenoiserArchitecture& arch) {
  arch.validate();
  const auto d = static_cast<Eigen::Index>(arch.input_dim());
  const auto h = static_cast<Eigen::Index>(arch.hidden);
  const auto f = static_cast<Eigen::Index>(arch.time_features);
  return DenoiserParameters{
      Eigen::MatrixXd::Zero(h, d), Eigen::VectorXd::Zero(h), Eigen::MatrixXd::Zero(h, f),
      Eigen::MatrixXd::Zero(h, h), Eigen::VectorXd::Zero(h), Eigen::MatrixXd::Zero(d, h),
      Eigen::VectorXd::Zero(d)};
}

std::size_t DenoiserParameters::count() const noexcept {
  std::size_t n = 0;
  visit_blocks(*this, [&](const double*, Eigen::Index size) { n += static_cast<std::size_t>(size); });
  return n;
}

std::vector<double> DenoiserParameters::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  visit_blocks(*this, [&](const double* data, Eigen::Index size) { out.insert(out.end(), data, data + size); });
  return out;
}

void DenoiserParameters::assign(std::span<const double> values) {
  if (values.size() != count()) {
    throw std::invalid_argument("DenoiserParameters::assign: expected " + std::to_string(count()) +
                                " values, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  visit_blocks(*this, [&](double* data, Eigen::Index size) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), size, data);
    offset += static_cast<std::size_t>(size);
  });
}

bool DenoiserParameters::all_finite() const {
  return w_in.allFinite() && b_in.allFinite() && w_time.allFinite() && w_hidden.allFinite() &&
         b_hidden.allFinite() && w_out.allFinite() && b_out.allFinite();
}

Denoiser::Denoiser(DenoiserArchitecture arch, DenoiserParameters params)
    : arch_(arch), params_(std::move(params)), version_(next_version()) {
  arch_.validate();
  check_parameter_shapes();
}

Denoiser Denoiser::random(const DenoiserArchitecture& arch, std::uint64_t seed) {
  auto params = DenoiserParameters::zeros(arch);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Eigen::MatrixXd& m, double fan_in) {
    const double scale = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * normal(rng);
  };
  fill(params.w_in, static_cast<double>(arch.input_dim()));
  fill(params.w_time, static_cast<double>(arch.time_features));
  fill(params.w_hidden, static_cast<double>(arch.hidden));
  fill(params.w_out, static_cast<double>(arch.hidden));
  return Denoiser(arch, std::move(params));
}

Denoiser Denoiser::zeros(const DenoiserArchitecture& arch) {
  return Denoiser(arch, DenoiserParameters::zeros(arch));
}

void Denoiser::check_parameter_shapes() const {
  const auto expected = DenoiserParameters::zeros(arch_);
  auto same = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(params_.w_in, expected.w_in) || !same(params_.b_in, expected.b_in) ||
      !same(params_.w_time, expected.w_time) || !same(params_.w_hidden, expected.w_hidden) ||
      !same(params_.b_hidden, expected.b_hidden) || !same(params_.w_out, expected.w_out) ||
      !same(params_.b_out, expected.b_out)) {
    throw std::invalid_argument("Denoiser: parameter shapes do not match the architecture");
  }
  if (!params_.all_finite()) throw std::invalid_argument("Denoiser: non-finite parameter");
}

void Denoiser::set_parameters(DenoiserParameters params) {
  params_ = std::move(params);
  check_parameter_shapes();
  version_ = next_version();
}

void Denoiser::apply_gradient(const DenoiserParameters& g, double learning_rate) {
  params_.w_in -= learning_rate * g.w_in;
  params_.b_in -= learning_rate * g.b_in;
  params_.w_time -= learning_rate * g.w_time;
  params_.w_hidden -= learning_rate * g.w_hidden;
  params_.b_hidden -= learning_rate * g.b_hidden;
  params_.w_out -= learning_rate * g.w_out;
  params_.b_out -= learning_rate * g.b_out;
  version_ = next_version();
}

Eigen::VectorXd Denoiser::time_features(int t) const {
  if (t < 1 || t > arch_.diffusion_steps) {
    throw std::out_of_range("Denoiser: step " + std::to_string(t) + " outside 1.." +
                            std::to_string(arch_.diffusion_steps));
  }
  // Frequencies are geometric between 1 and 1/T, so the slowest feature
  // sweeps at most one radian over the whole schedule.
  const auto half = static_cast<Eigen::Index>(arch_.time_features / 2);
  Eigen::VectorXd phi(2 * half);
  const double log_t = std::log(static_cast<double>(std::max(arch_.diffusion_steps, 2)));
  for (Eigen::Index j = 0; j < half; ++j) {
    const double frac = half > 1 ? static_cast<double>(j) / static_cast<double>(half - 1) : 0.0;
    const double angle = t * std::exp(-log_t * frac);
    phi(2 * j) = std::sin(angle);
    phi(2 * j + 1) = std::cos(angle);
  }
  return phi;
}

Eigen::MatrixXd Denoiser::forward(const Eigen::MatrixXd& inputs, std::span<const int> steps,
                                  DenoiserCache* cache) const {
  const auto d = static_cast<Eigen::Index>(arch_.input_dim());
  if (inputs.rows() != d) {
    throw std::invalid_argument("Denoiser::forward: input has " + std::to_string(inputs.rows()) +
                                " rows, expected " + std::to_string(d));
  }
  if (static_cast<std::size_t>(inputs.cols()) != steps.size()) {
    throw std::invalid_argument("Denoiser::forward: one step per column required");
  }
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(arch_.time_features), inputs.cols());
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) phi.col(j) = time_features(steps[static_cast<std::size_t>(j)]);

  Eigen::MatrixXd pre1 = params_.w_in * inputs + params_.w_time * phi;
  pre1.colwise() += params_.b_in;
  Eigen::MatrixXd h1 = activate(pre1, arch_.activation);
  Eigen::MatrixXd pre2 = params_.w_hidden * h1;
  pre2.colwise() += params_.b_hidden;
  Eigen::MatrixXd h2 = activate(pre2, arch_.activation);
  Eigen::MatrixXd out = params_.w_out * h2;
  out.colwise() += params_.b_out;

  if (cache != nullptr) {
    cache->parameter_version = version_;
    cache->steps.assign(steps.begin(), steps.end());
    cache->inputs = inputs;
    cache->time_features = std::move(phi);
    cache->hidden1 = std::move(h1);
    cache->hidden2 = std::move(h2);
  }
  return out;
}

DenoiserParameters Denoiser::backward(const DenoiserCache& cache,
                                      const Eigen::MatrixXd& d_output) const {
  if (cache.parameter_version != version_) {
    throw StaleCacheError("Denoiser::backward: cache was produced by a different parameter state");
  }
  if (d_output.rows() != params_.w_out.rows() || d_output.cols() != cache.inputs.cols()) {
    throw std::invalid_argument("Denoiser::backward: output gradient shape mismatch");
  }
  DenoiserParameters g;
  g.w_out = d_output * cache.hidden2.transpose();
  g.b_out = d_output.rowwise().sum();

  Eigen::MatrixXd d_pre2 = (params_.w_out.transpose() * d_output)
                               .cwiseProduct(activation_slope(cache.hidden2, arch_.activation));
  g.w_hidden = d_pre2 * cache.hidden1.transpose();
  g.b_hidden = d_pre2.rowwise().sum();

  Eigen::MatrixXd d_pre1 = (params_.w_hidden.transpose() * d_pre2)
                               .cwiseProduct(activation_slope(cache.hidden1, arch_.activation));
  g.w_in = d_pre1 * cache.inputs.transpose();
  g.b_in = d_pre1.rowwise().sum();
  g.w_time = d_pre1 * cache.time_features.transpose();
  return g;
}

TimeSeries Denoiser::predict(const TimeSeries& x_t, int t, const NoiseSchedule& schedule) const {
  if (schedule.steps() != arch_.diffusion_steps) {
    throw std::invalid_argument("Denoiser: trained for T = " + std::to_string(arch_.diffusion_steps) +
                                ", schedule has T = " + std::to_string(schedule.steps()));
  }
  return denoiser_forward(*this, x_t, t).eps_hat;
}

DenoiserOutput denoiser_forward(const Denoiser& model, const TimeSeries& x_t, int t) {
  const auto& arch = model.architecture();
  if (x_t.channels() != arch.channels || x_t.length() != arch.length) {
    throw std::invalid_argument("denoiser_forward: input is " + std::to_string(x_t.channels()) +
                                "x" + std::to_string(x_t.length()) + ", model expects " +
                                std::to_string(arch.channels) + "x" + std::to_string(arch.length));
  }
  const auto d = static_cast<Eigen::Index>(x_t.size());
  Eigen::MatrixXd input = Eigen::Map<const Eigen::VectorXd>(x_t.values().data(), d);
  DenoiserCache cache;
  const int steps[] = {t};
  Eigen::MatrixXd out = model.forward(input, steps, &cache);
  return {TimeSeries(x_t.channels(), x_t.length(), std::vector<double>(out.data(), out.data() + d)),
          std::move(cache)};
}

DenoiserParameters denoiser_backward(const Denoiser& model, const DenoiserCache& cache,
                                     const TimeSeries& d_eps_hat) {
  const auto d = static_cast<Eigen::Index>(d_eps_hat.size());
  Eigen::MatrixXd grad = Eigen::Map<const Eigen::VectorXd>(d_eps_hat.values().data(), d);
  return model.backward(cache, grad);
}

TrainingLog train(Denoiser& model, std::span<const TimeSeries> dataset,
                  const NoiseSchedule& schedule, const TrainingOptions& options) {
  TrainingLog log;
  if (options.steps < 0) throw std::invalid_argument("train: negative step count");
  if (options.steps == 0) return log;
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (options.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (!(options.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  const auto& arch = model.architecture();
  if (schedule.steps() != arch.diffusion_steps) {
    throw std::invalid_argument("train: schedule T does not match the model");
  }
  for (const auto& x : dataset) {
    if (x.channels() != arch.channels || x.length() != arch.length) {
      throw std::invalid_argument("train: sample shape does not match the model");
    }
  }

  const auto d = static_cast<Eigen::Index>(arch.input_dim());
  const auto batch = static_cast<Eigen::Index>(options.batch_size);
  Rng rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::uniform_int_distribution<int> pick_step(1, schedule.steps());
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd inputs(d, batch);
  Eigen::MatrixXd targets(d, batch);
  std::vector<int> steps(options.batch_size);
  DenoiserCache cache;
  log.losses.reserve(static_cast<std::size_t>(options.steps));

  for (int step = 0; step < options.steps; ++step) {
    for (Eigen::Index j = 0; j < batch; ++j) {
      const auto& x0 = dataset[pick(rng)];
      const int t = pick_step(rng);
      steps[static_cast<std::size_t>(j)] = t;
      const double a = std::sqrt(schedule.alpha_bar(t));
      const double b = std::sqrt(1.0 - schedule.alpha_bar(t));
      const auto xs = x0.values();
      for (Eigen::Index i = 0; i < d; ++i) {
        const double eps = normal(rng);
        targets(i, j) = eps;
        inputs(i, j) = a * xs[static_cast<std::size_t>(i)] + b * eps;
      }
    }
    const Eigen::MatrixXd out = model.forward(inputs, steps, &cache);
    const Eigen::MatrixXd residual = out - targets;
    const double scale = 1.0 / static_cast<double>(d * batch);
    const double loss = residual.squaredNorm() * scale;
    if (!std::isfinite(loss)) {
      throw TrainingDiverged("train: loss became non-finite at step " + std::to_string(step) +
                             " (learning rate " + format_double(options.learning_rate) + ")");
    }
    log.losses.push_back(loss);
    model.apply_gradient(model.backward(cache, 2.0 * scale * residual), options.learning_rate);
  }
  if (!model.parameters().all_finite()) {
    throw TrainingDiverged("train: parameters became non-finite");
  }
  return log;
}

double evaluate_eps_mse(const EpsilonPredictor& predictor, std::span<const TimeSeries> dataset,
                        const NoiseSchedule& schedule, std::size_t samples, std::uint64_t seed) {
  if (dataset.empty() || samples == 0) throw std::invalid_argument("evaluate_eps_mse: nothing to evaluate");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::uniform_int_distribution<int> pick_step(1, schedule.steps());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& x0 = dataset[pick(rng)];
    const int t = pick_step(rng);
    const auto eps = standard_normal(x0.channels(), x0.length(), rng);
    const auto x_t = diffuse(x0, t, eps, schedule);
    const auto eps_hat = predictor.predict(x_t, t, schedule);
    const auto e = eps.values();
    const auto h = eps_hat.values();
    for (std::size_t i = 0; i < e.size(); ++i) total += (e[i] - h[i]) * (e[i] - h[i]);
    count += e.size();
  }
  return total / static_cast<double>(count);
}

void write_denoiser(std::ostream& out, const Denoiser& model) {
  const auto& a = model.architecture();
  const auto values = model.parameters().flatten();
  out << "denoiser v1\n"
      << "channels " << a.channels << "\n"
      << "length " << a.length << "\n"
      << "hidden " << a.hidden << "\n"
      << "time_features " << a.time_features << "\n"
      << "T " << a.diffusion_steps << "\n"
      << "activation " << to_string(a.activation) << "\n"
      << "parameters " << values.size() << "\n";
  for (double v : values) out << format_double(v) << "\n";
}

Denoiser read_denoiser(std::istream& in) {
  if (read_key(in, "denoiser") != "v1") throw std::runtime_error("denoiser file: unsupported version");
  DenoiserArchitecture arch;
  arch.channels = read_size(in, "channels");
  arch.length = read_size(in, "length");
  arch.hidden = read_size(in, "hidden");
  arch.time_features = read_size(in, "time_features");
  arch.diffusion_steps = static_cast<int>(read_size(in, "T"));
  arch.activation = activation_from_string(read_key(in, "activation"));
  arch.validate();
  auto params = DenoiserParameters::zeros(arch);
  const auto count = read_size(in, "parameters");
  if (count != params.count()) {
    throw std::runtime_error("denoiser file: header declares " + std::to_string(count) +
                             " parameters, architecture needs " + std::to_string(params.count()));
  }
  std::vector<double> values(count);
  std::string token;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> token)) throw std::runtime_error("denoiser file: truncated parameter list");
    const auto v = parse_double(token);
    if (!v || !std::isfinite(*v)) {
      throw std::runtime_error("denoiser file: bad parameter value '" + token + "'");
    }
    values[i] = *v;
  }
  params.assign(values);
  return Denoiser(arch, std::move(params));
}

void write_model_bundle(std::ostream& out, const std::vector<ClassDenoiser>& bundle) {
  if (bundle.empty()) throw std::invalid_argument("write_model_bundle: empty bundle");
  out << "#sawtooth-model v1\n"
      << "classes " << bundle.size() << "\n";
  for (const auto& member : bundle) {
    if (!(member.model.architecture() == bundle.front().model.architecture())) {
      throw std::invalid_argument("write_model_bundle: mixed architectures");
    }
    if (member.name.empty() || member.name.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("write_model_bundle: class name must be a single word");
    }
    out << "class " << member.label << " " << member.name << "\n";
    write_denoiser(out, member.model);
  }
}

std::vector<ClassDenoiser> read_model_bundle(std::istream& in) {
  std::string tag;
  std::string version;
  if (!(in >> tag >> version) || tag != "#sawtooth-model" || version != "v1") {
    throw std::runtime_error("model file: missing '#sawtooth-model v1' header");
  }
  const auto count = read_size(in, "classes");
  if (count == 0) throw std::runtime_error("model file: no classes");
  std::vector<ClassDenoiser> bundle;
  for (std::size_t i = 0; i < count; ++i) {
    std::string keyword;
    std::string label_text;
    std::string name;
    if (!(in >> keyword >> label_text >> name) || keyword != "class") {
      throw std::runtime_error("model file: expected 'class <label> <name>' entry " + std::to_string(i));
    }
    const auto label = parse_int(label_text);
    if (!label) throw std::runtime_error("model file: bad class label '" + label_text + "'");
    auto model = read_denoiser(in);
    if (!bundle.empty() && !(model.architecture() == bundle.front().model.architecture())) {
      throw std::runtime_error("model file: class " + label_text + " has a different architecture");
    }
    bundle.push_back({static_cast<int>(*label), name, std::move(model)});
  }
  return bundle;
}

}  // namespace sawtooth
