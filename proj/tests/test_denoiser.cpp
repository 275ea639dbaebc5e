#include <cmath>
#include <numeric>
#include <sstream>

#include <doctest.h>

#include "sawtooth/denoiser.hpp"
#include "sawtooth/gradcheck.hpp"
#include "test_support.hpp"

using namespace sawtooth;

namespace {

DenoiserArchitecture small_arch(Activation act = Activation::tanh) {
  DenoiserArchitecture a;
  a.channels = 2;
  a.length = 5;
  a.hidden = 7;
  a.time_features = 6;
  a.diffusion_steps = 50;
  a.activation = act;
  return a;
}

Denoiser with_random_biases(Denoiser model, std::uint64_t seed) {
  auto p = model.parameters();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (auto* b : {&p.b_in, &p.b_hidden, &p.b_out})
    for (Eigen::Index i = 0; i < b->size(); ++i) (*b)(i) = normal(rng);
  model.set_parameters(std::move(p));
  return model;
}

std::vector<TimeSeries> sine_dataset(std::size_t n, std::size_t length, Rng& rng) {
  std::vector<TimeSeries> out;
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = test::uniform(rng, 0, 6.28);
    TimeSeries x(1, length);
    for (std::size_t i = 0; i < length; ++i) x(0, i) = std::sin(0.5 * i + phase);
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_CASE("architecture validation") {
  auto a = small_arch();
  CHECK_NOTHROW(a.validate());
  a.time_features = 5;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = small_arch();
  a.hidden = 0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  CHECK(activation_from_string("identity") == Activation::identity);
  CHECK(std::string(to_string(Activation::tanh)) == "tanh");
  CHECK_THROWS_AS(activation_from_string("relu"), std::invalid_argument);
}

TEST_CASE("parameters flatten and assign round-trip") {
  const auto model = Denoiser::random(small_arch(), 1);
  const auto flat = model.parameters().flatten();
  CHECK(flat.size() == model.parameters().count());
  // 7*10 + 7 + 7*6 + 7*7 + 7 + 10*7 + 10
  CHECK(flat.size() == 255);
  auto p = DenoiserParameters::zeros(small_arch());
  p.assign(flat);
  CHECK(p.flatten() == flat);
  CHECK_THROWS_AS(p.assign(std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("identity network matches direct matrix algebra") {
  const auto arch = small_arch(Activation::identity);
  const auto model = with_random_biases(Denoiser::random(arch, 2), 3);
  const auto& p = model.parameters();
  Rng rng(4);
  const auto x = test::random_series(2, 5, rng);
  const int t = 17;
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.values().data(), 10);

  Eigen::VectorXd phi(6);
  for (int j = 0; j < 3; ++j) {
    const double freq = std::pow(50.0, -j / 2.0);
    phi(2 * j) = std::sin(t * freq);
    phi(2 * j + 1) = std::cos(t * freq);
  }
  const Eigen::VectorXd h1 = p.w_in * v + p.w_time * phi + p.b_in;
  const Eigen::VectorXd h2 = p.w_hidden * h1 + p.b_hidden;
  const Eigen::VectorXd expected = p.w_out * h2 + p.b_out;

  const auto out = denoiser_forward(model, x, t).eps_hat;
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(out.values()[i] == doctest::Approx(expected(i)).epsilon(1e-12));
}

TEST_CASE("batched forward equals per-sample forward") {
  const auto model = Denoiser::random(small_arch(), 5);
  Rng rng(6);
  Eigen::MatrixXd inputs(10, 4);
  std::vector<int> steps = {1, 9, 33, 50};
  std::vector<TimeSeries> xs;
  for (int j = 0; j < 4; ++j) {
    xs.push_back(test::random_series(2, 5, rng));
    inputs.col(j) = Eigen::Map<const Eigen::VectorXd>(xs.back().values().data(), 10);
  }
  const auto out = model.forward(inputs, steps, nullptr);
  for (int j = 0; j < 4; ++j) {
    const auto single = denoiser_forward(model, xs[j], steps[j]).eps_hat;
    for (Eigen::Index i = 0; i < 10; ++i) CHECK(out(i, j) == doctest::Approx(single.values()[i]).epsilon(1e-13));
  }
}

TEST_CASE("hand backprop agrees with central differences") {
  for (auto act : {Activation::tanh, Activation::identity}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto model = with_random_biases(Denoiser::random(small_arch(act), 100 + seed), 200 + seed);
      const auto r = check_gradients(model, 4, 1e-5, 300 + seed);
      CHECK(r.parameters == model.parameters().count());
      CHECK(r.probes == 4);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("gradient check detects a wrong gradient") {
  // A hand-perturbed analytic value should be flagged by the relative error.
  CHECK(gradient_relative_error(1.0, 1.0) == 0.0);
  CHECK(gradient_relative_error(1.0, 1.01) == doctest::Approx(0.01 / 1.01));
  CHECK(gradient_relative_error(1e-12, -1e-12) == doctest::Approx(2e-12 / 1e-7));
  CHECK(gradient_relative_error(0.0, 0.0) == 0.0);
}

TEST_CASE("stale cache is rejected") {
  auto model = Denoiser::random(small_arch(), 7);
  Rng rng(8);
  auto out = denoiser_forward(model, test::random_series(2, 5, rng), 3);
  const auto g = denoiser_backward(model, out.cache, out.eps_hat);
  model.apply_gradient(g, 0.01);
  CHECK_THROWS_AS(denoiser_backward(model, out.cache, out.eps_hat), StaleCacheError);
}

TEST_CASE("predict checks schedule length and input shape") {
  const auto model = Denoiser::random(small_arch(), 9);
  CHECK_THROWS_AS(model.predict(TimeSeries(2, 5), 1, build_schedule(40, 0.01, 0.1)), std::invalid_argument);
  CHECK_THROWS_AS(model.predict(TimeSeries(1, 5), 1, build_schedule(50, 0.01, 0.1)), std::invalid_argument);
  CHECK_THROWS_AS(model.predict(TimeSeries(2, 5), 51, build_schedule(50, 0.01, 0.1)), std::out_of_range);
}

TEST_CASE("training lowers the loss and is deterministic") {
  DenoiserArchitecture arch;
  arch.channels = 1;
  arch.length = 16;
  arch.hidden = 32;
  arch.time_features = 8;
  arch.diffusion_steps = 100;
  const auto schedule = build_schedule(100, 1e-3, 0.1);
  Rng rng(10);
  const auto data = sine_dataset(64, 16, rng);

  TrainingOptions opts;
  opts.steps = 600;
  opts.learning_rate = 0.05;
  opts.batch_size = 16;
  opts.seed = 11;

  auto a = Denoiser::random(arch, 12);
  auto b = Denoiser::random(arch, 12);
  const auto before = evaluate_eps_mse(a, data, schedule, 2000, 13);
  const auto log_a = train(a, data, schedule, opts);
  const auto log_b = train(b, data, schedule, opts);
  const auto after = evaluate_eps_mse(a, data, schedule, 2000, 13);

  CHECK(log_a.losses.size() == 600);
  CHECK(log_a.losses == log_b.losses);
  CHECK(a.parameters().flatten() == b.parameters().flatten());
  const double head = std::accumulate(log_a.losses.begin(), log_a.losses.begin() + 50, 0.0) / 50;
  const double tail = std::accumulate(log_a.losses.end() - 50, log_a.losses.end(), 0.0) / 50;
  CHECK(tail < head);
  CHECK(after < before);

  opts.steps = 0;
  CHECK(train(a, data, schedule, opts).losses.empty());
}

TEST_CASE("training argument checks") {
  auto model = Denoiser::random(small_arch(), 14);
  const auto schedule = build_schedule(50, 1e-3, 0.1);
  const std::vector<TimeSeries> data = {TimeSeries(2, 5)};
  TrainingOptions opts;
  opts.steps = 1;
  CHECK_THROWS_AS(train(model, std::vector<TimeSeries>{}, schedule, opts), std::invalid_argument);
  CHECK_THROWS_AS(train(model, data, build_schedule(20, 1e-3, 0.1), opts), std::invalid_argument);
  CHECK_THROWS_AS(train(model, std::vector<TimeSeries>{TimeSeries(1, 5)}, schedule, opts),
                  std::invalid_argument);
  opts.learning_rate = 0.0;
  CHECK_THROWS_AS(train(model, data, schedule, opts), std::invalid_argument);
}

TEST_CASE("diverging training is reported") {
  auto model = Denoiser::random(small_arch(Activation::identity), 15);
  const auto schedule = build_schedule(50, 1e-3, 0.1);
  Rng rng(16);
  std::vector<TimeSeries> data;
  for (int i = 0; i < 8; ++i) data.push_back(test::random_series(2, 5, rng, 100.0));
  TrainingOptions opts;
  opts.steps = 200;
  opts.learning_rate = 50.0;
  CHECK_THROWS_AS(train(model, data, schedule, opts), TrainingDiverged);
}

TEST_CASE("model text round-trips bit for bit") {
  const auto model = with_random_biases(Denoiser::random(small_arch(), 17), 18);
  std::stringstream ss;
  write_denoiser(ss, model);
  const auto back = read_denoiser(ss);
  CHECK(back.architecture() == model.architecture());
  CHECK(back.parameters().flatten() == model.parameters().flatten());
}

TEST_CASE("model bundle round-trips and rejects corrupt input") {
  std::vector<ClassDenoiser> bundle;
  bundle.push_back({0, "walk", Denoiser::random(small_arch(), 19)});
  bundle.push_back({3, "run", Denoiser::random(small_arch(), 20)});
  std::stringstream ss;
  write_model_bundle(ss, bundle);
  const std::string text = ss.str();
  CHECK(text.rfind("#sawtooth-model v1\n", 0) == 0);

  std::istringstream in(text);
  const auto back = read_model_bundle(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1].label == 3);
  CHECK(back[1].name == "run");
  CHECK(back[1].model.parameters().flatten() == bundle[1].model.parameters().flatten());

  std::istringstream no_header(text.substr(text.find('\n') + 1));
  CHECK_THROWS_AS(read_model_bundle(no_header), std::runtime_error);
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_model_bundle(truncated), std::runtime_error);

  std::string bad = text;
  bad.replace(bad.find("activation tanh"), 15, "activation relu");
  std::istringstream bad_act(bad);
  CHECK_THROWS(read_model_bundle(bad_act));

  std::vector<ClassDenoiser> mixed;
  mixed.push_back({0, "a", Denoiser::random(small_arch(), 21)});
  mixed.push_back({1, "b", Denoiser::random(small_arch(Activation::identity), 22)});
  std::stringstream sink;
  CHECK_THROWS_AS(write_model_bundle(sink, mixed), std::invalid_argument);
}
