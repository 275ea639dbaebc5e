#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sawtooth/predictor.hpp"

namespace sawtooth {

enum class Activation { tanh, identity };

const char* to_string(Activation activation) noexcept;
Activation activation_from_string(const std::string& name);

/// Shape of the epsilon network. The flattened series (channels * length) goes
/// through two hidden layers; sinusoidal features of t, projected by a learned
/// matrix, are added to the first hidden pre-activation.
struct DenoiserArchitecture {
  std::size_t channels = 1;
  std::size_t length = 32;
  std::size_t hidden = 64;
  std::size_t time_features = 16;
  int diffusion_steps = 1000;
  Activation activation = Activation::tanh;

  std::size_t input_dim() const noexcept { return channels * length; }
  void validate() const;
  friend bool operator==(const DenoiserArchitecture&, const DenoiserArchitecture&) = default;
};

/// Weights, or gradients with the same layout.
struct DenoiserParameters {
  Eigen::MatrixXd w_in;      // hidden x D
  Eigen::VectorXd b_in;      // hidden
  Eigen::MatrixXd w_time;    // hidden x time_features
  Eigen::MatrixXd w_hidden;  // hidden x hidden
  Eigen::VectorXd b_hidden;  // hidden
  Eigen::MatrixXd w_out;     // D x hidden
  Eigen::VectorXd b_out;     // D

  static DenoiserParameters zeros(const DenoiserArchitecture& arch);

  std::size_t count() const noexcept;
  /// Order: w_in, b_in, w_time, w_hidden, b_hidden, w_out, b_out; matrices column-major.
  std::vector<double> flatten() const;
  void assign(std::span<const double> values);
  bool all_finite() const;
};

/// Activations kept by the forward pass. Bound to the exact parameter state
/// that produced it.
struct DenoiserCache {
  std::uint64_t parameter_version = 0;
  std::vector<int> steps;
  Eigen::MatrixXd inputs;         // D x B
  Eigen::MatrixXd time_features;  // F x B
  Eigen::MatrixXd hidden1;        // post-activation
  Eigen::MatrixXd hidden2;
};

class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Denoiser final : public EpsilonPredictor {
 public:
  Denoiser(DenoiserArchitecture arch, DenoiserParameters params);

  /// Scaled normal init (variance 1/fan_in) for weights, zero biases.
  static Denoiser random(const DenoiserArchitecture& arch, std::uint64_t seed);
  static Denoiser zeros(const DenoiserArchitecture& arch);

  const DenoiserArchitecture& architecture() const noexcept { return arch_; }
  const DenoiserParameters& parameters() const noexcept { return params_; }
  std::uint64_t parameter_version() const noexcept { return version_; }

  void set_parameters(DenoiserParameters params);
  /// params -= learning_rate * gradient
  void apply_gradient(const DenoiserParameters& gradient, double learning_rate);

  /// Columns of `inputs` are flattened samples; steps[j] is the diffusion step of column j.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, std::span<const int> steps,
                          DenoiserCache* cache) const;
  /// Parameter gradients given dL/d(output) for the batch recorded in `cache`.
  DenoiserParameters backward(const DenoiserCache& cache, const Eigen::MatrixXd& d_output) const;

  TimeSeries predict(const TimeSeries& x_t, int t, const NoiseSchedule& schedule) const override;

  Eigen::VectorXd time_features(int t) const;

 private:
  void check_parameter_shapes() const;

  DenoiserArchitecture arch_;
  DenoiserParameters params_;
  std::uint64_t version_;
};

struct DenoiserOutput {
  TimeSeries eps_hat;
  DenoiserCache cache;
};

DenoiserOutput denoiser_forward(const Denoiser& model, const TimeSeries& x_t, int t);
DenoiserParameters denoiser_backward(const Denoiser& model, const DenoiserCache& cache,
                                     const TimeSeries& d_eps_hat);

struct TrainingOptions {
  int steps = 2000;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainingLog {
  std::vector<double> losses;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minibatch SGD on mean((eps - eps_hat(diffuse(x0, t, eps), t))^2) with t
/// uniform over 1..T. Deterministic for a fixed seed.
TrainingLog train(Denoiser& model, std::span<const TimeSeries> dataset,
                  const NoiseSchedule& schedule, const TrainingOptions& options);

/// Mean squared epsilon error of `predictor` over `samples` random
/// (x0, t, eps) draws.
double evaluate_eps_mse(const EpsilonPredictor& predictor, std::span<const TimeSeries> dataset,
                        const NoiseSchedule& schedule, std::size_t samples, std::uint64_t seed);

// Text model format, one denoiser per block:
//
//   denoiser v1
//   channels <n>
//   length <n>
//   hidden <n>
//   time_features <n>
//   T <n>
//   activation <tanh|identity>
//   parameters <count>
//   <one value per line, flatten() order>
void write_denoiser(std::ostream& out, const Denoiser& model);
Denoiser read_denoiser(std::istream& in);

/// One unconditional denoiser per class label.
struct ClassDenoiser {
  int label;
  std::string name;
  Denoiser model;
};

// Bundle file:
//   #sawtooth-model v1
//   classes <n>
//   then per class: "class <label> <name>" followed by a denoiser block.
// All members must share the same architecture.
void write_model_bundle(std::ostream& out, const std::vector<ClassDenoiser>& bundle);
std::vector<ClassDenoiser> read_model_bundle(std::istream& in);

}  // namespace sawtooth
