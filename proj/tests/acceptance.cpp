// Acceptance checks, one PASS/FAIL line per criterion.
//
//   sawtooth_acceptance                   run all criteria
//   sawtooth_acceptance --write-fixture   regenerate the step-curve fixture

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <iostream>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "sawtooth/commands.hpp"
#include "sawtooth/data.hpp"
#include "sawtooth/denoiser.hpp"
#include "sawtooth/evaluation.hpp"
#include "sawtooth/forward.hpp"
#include "sawtooth/gaussian.hpp"
#include "sawtooth/sampler.hpp"
#include "sawtooth/text_io.hpp"
#include "test_support.hpp"

using namespace sawtooth;

namespace {

const std::filesystem::path kConfigs = SAWTOOTH_CONFIG_DIR;
const std::filesystem::path kFixtures = SAWTOOTH_FIXTURE_DIR;
const std::filesystem::path kCurveFixture = kFixtures / "stepcurve_k2_class0_sample0.csv";

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

RunConfig load(const std::string& name, const std::map<std::string, std::string>& overrides) {
  auto cfg = RunConfig::load(kConfigs / name);
  for (const auto& [key, value] : overrides) cfg.set(key, value);
  return cfg;
}

CommandOutput run(const std::string& command, const std::string& config,
                  const std::map<std::string, std::string>& overrides) {
  auto cfg = load(config, overrides);
  return run_command(command, cfg);
}

TimeSeries ancestral_update(const TimeSeries& x, const TimeSeries& eps, const TimeSeries& z, int t,
                            const NoiseSchedule& s) {
  const double beta = s.beta(t);
  const double ab = s.alpha_bar(t);
  const double var = beta * (1 - s.alpha_bar(t - 1)) / (1 - ab);
  TimeSeries out(x.channels(), x.length());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.values()[i] = (x.values()[i] - beta / std::sqrt(1 - ab) * eps.values()[i]) / std::sqrt(1 - beta) +
                      std::sqrt(var) * z.values()[i];
  }
  return out;
}

Outcome nfe_speedup(const test::TempDir& dir) {
  const auto start = Clock::now();
  const auto report = dir / "bench.txt";
  const auto out = run("bench", "bench.ini", {{"output.report", report.string()}});
  const double elapsed = seconds_since(start);
  const auto text = test::read_text(report);
  const double nfe_ratio = out.metrics.at("nfe_ratio");
  const double wall_ratio = out.metrics.at("wall_ratio");
  const bool exact = nfe_ratio == 30.0 && text.find("\nnfe_ratio = 30.0\n") != std::string::npos;
  return {exact && wall_ratio >= 10.0 && elapsed < 60.0,
          "nfe " + fmt(out.metrics.at("nfe_ddpm")) + "/" + fmt(out.metrics.at("nfe_sawtooth")) +
              " = " + fmt(nfe_ratio) + ", wall ratio " + fmt(wall_ratio) + " (>= 10), " + fmt(elapsed) +
              " s"};
}

Outcome sawtooth_ddim_equivalence() {
  DenoiserArchitecture arch;
  arch.channels = 3;
  arch.length = 32;
  arch.hidden = 32;
  const auto model = Denoiser::random(arch, 1);
  const auto setup = build_sawtooth_plan(100, 1, 1000, 1e-4, 0.02);
  const auto ddim = make_ddim_plan(1000, 100);
  int identical = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    Rng rng(derive_seed(42, run));
    const auto x_T = standard_normal(3, 32, rng);
    const auto a = sawtooth_sample(x_T, model, setup.schedule, setup.plan, derive_seed(7, run));
    const auto b = ddim_sample(x_T, model, ddim, setup.schedule, 0.0, derive_seed(8, run));
    if (a.final_state == b.final_state && a.states == b.states && a.steps == b.steps) ++identical;
  }
  return {identical == 100, std::to_string(identical) + "/100 runs bitwise identical"};
}

Outcome transport_exactness() {
  Rng rng(3);
  double worst_step = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    // The step divides by sqrt(alpha_bar(tau_cur)), so input rounding grows
    // like 1e-16 / sqrt(alpha_bar). Schedules stay within the default beta
    // range and T <= 1000, where alpha_bar(T) >= 4e-5.
    const int T = test::uniform_int(rng, 2, 1000);
    const double lo = test::uniform(rng, 1e-5, 1e-4);
    const auto s = build_schedule(T, lo, test::uniform(rng, 1e-3, 0.02));
    const int cur = test::uniform_int(rng, 1, T);
    const int prev = test::uniform_int(rng, 0, cur - 1);
    const auto x0 = test::random_series(2, 8, rng);
    const auto eps = test::random_series(2, 8, rng);
    const auto moved = ddim_step(diffuse(x0, cur, eps, s), eps, cur, prev, s);
    worst_step = std::max(worst_step, max_abs_difference(moved, prev == 0 ? x0 : diffuse(x0, prev, eps, s)));
  }
  double worst_full = 0.0;
  const auto s = build_schedule(1000, 1e-4, 0.02);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x0 = test::random_series(2, 8, rng);
    const auto eps = test::random_series(2, 8, rng);
    const GroundTruthPredictor truth(eps);
    const auto plan = make_ddim_plan(1000, test::uniform_int(rng, 1, 1000));
    const auto tr = ddim_sample(diffuse(x0, 1000, eps, s), truth, plan, s, 0.0, rng);
    worst_full = std::max(worst_full, max_abs_difference(tr.final_state, x0));
  }
  return {worst_step < 1e-10 && worst_full < 1e-10,
          "max step error " + fmt(worst_step) + " over 1000 cases, max x0 error " + fmt(worst_full) +
              " over 100 full passes (< 1e-10)"};
}

Outcome ddpm_equivalence() {
  const auto s = build_schedule(1000, 1e-4, 0.02);
  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = test::uniform_int(rng, 1, 1000);
    const auto x = test::random_series(2, 8, rng, 2.0);
    const auto e = test::random_series(2, 8, rng);
    const auto z = test::random_series(2, 8, rng);
    const auto got = ddim_step(x, e, t, t - 1, sigma_from_eta(1.0, t - 1, t, s), z, s);
    worst = std::max(worst, max_abs_difference(got, ancestral_update(x, e, z, t, s)));
  }
  return {worst < 1e-8, "max deviation " + fmt(worst) + " over 1000 states (< 1e-8)"};
}

Outcome gaussian_oracle(const test::TempDir& dir) {
  const auto start = Clock::now();
  const auto samples_path = dir / "oracle_samples.csv";
  run("sample", "sample_oracle.ini",
      {{"output.samples", samples_path.string()}, {"output.trajectory", (dir / "oracle_traj.csv").string()}});
  const auto ds = load_csv(samples_path);

  const auto spec = GaussianDataSpec::ar1(
      [&] {
        TimeSeries mu(2, 16);
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t i = 0; i < 16; ++i) mu(c, i) = std::sin(2.0 * std::numbers::pi * double(i) / 16.0 + double(c));
        return mu;
      }(),
      0.9, 1.0);

  const auto d = static_cast<Eigen::Index>(spec.dimension());
  const double n = static_cast<double>(ds.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : ds.samples) mean += Eigen::Map<const Eigen::VectorXd>(x.values().data(), d);
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : ds.samples) {
    const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(x.values().data(), d) - mean;
    cov += r * r.transpose();
  }
  cov /= n - 1;

  const Eigen::Map<const Eigen::VectorXd> mu(spec.mean().values().data(), d);
  const double mean_tol = 0.05 * (1.0 + mu.cwiseAbs().maxCoeff());
  const double mean_err = (mean - mu).cwiseAbs().maxCoeff();
  const double cov_err = (cov - spec.covariance()).norm() / spec.covariance().norm();
  const double elapsed = seconds_since(start);
  return {ds.size() == 2000 && mean_err <= mean_tol && cov_err < 0.10 && elapsed < 300.0,
          std::to_string(ds.size()) + " samples, max mean error " + fmt(mean_err) + " (<= " + fmt(mean_tol) +
              "), covariance rel. Frobenius error " + fmt(cov_err) + " (< 0.1), " + fmt(elapsed) + " s"};
}

Outcome gradient_correctness(const test::TempDir& dir) {
  const auto out = run("gradcheck", "gradcheck.ini", {{"output.report", (dir / "gradcheck.txt").string()}});
  const double err = out.metrics.at("max_rel_err");
  return {err < 1e-4, "max relative error " + fmt(err) + " over 5 models (< 1e-4)"};
}

Outcome scheduler_validity() {
  int failures = 0;
  for (int n : {1, 2, 5, 10}) {
    const auto setup = build_sawtooth_plan(100, n, 1000, 1e-4, 0.02);
    if (setup.plan.iterations() * setup.plan.steps_per_iteration() != 100) ++failures;
  }
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = test::uniform_int(rng, 100, 4000);
    const double lo = test::uniform(rng, 1e-6, 0.01);
    const auto s = build_schedule(T, lo, test::uniform(rng, lo, 0.05));
    for (int t = 1; t <= T; ++t) {
      if (!(s.beta(t) > 0.0 && s.beta(t) < 1.0 && s.alpha_bar(t) < s.alpha_bar(t - 1))) ++failures;
    }
    for (int n : {1, 2, 5, 10}) {
      const auto setup = build_sawtooth_plan(100, n, T, lo, 0.05);
      if (setup.plan.iterations() * setup.plan.steps_per_iteration() != 100) ++failures;
    }
  }
  return {failures == 0, std::to_string(failures) + " violations over 200 schedules x N in {1,2,5,10}"};
}

Outcome similarity_proxy() {
  Rng rng(8);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto ch = static_cast<std::size_t>(test::uniform_int(rng, 1, 4));
    const auto len = static_cast<std::size_t>(test::uniform_int(rng, 2, 128));
    const auto a = test::random_series(ch, len, rng, test::uniform(rng, 1e-2, 1e2));
    const auto b = test::random_series(ch, len, rng, test::uniform(rng, 1e-2, 1e2));
    const double s = psd_similarity(a, b);
    const double k = test::uniform(rng, 1e-3, 1e3);
    if (std::abs(psd_similarity(a, a) - 1.0) > 1e-12) ++failures;
    if (!(s >= 0.0 && s <= 1.0)) ++failures;
    if (std::abs(psd_similarity(b, a) - s) > 1e-12) ++failures;
    if (std::abs(psd_similarity(linear_combination(k, a, 0.0, a), b) - s) > 1e-9) ++failures;
  }

  DenoiserArchitecture arch;
  arch.channels = 2;
  arch.length = 32;
  arch.hidden = 16;
  const auto model = Denoiser::random(arch, 9);
  const auto setup = build_sawtooth_plan(100, 2, 1000, 1e-4, 0.02);
  const auto tr = sawtooth_sample(standard_normal(2, 32, rng), model, setup.schedule, setup.plan, rng);
  CyclicOptions opts;
  opts.channels = 2;
  opts.length = 32;
  opts.per_class = 3;
  const auto curve = per_step_curve(tr, gen_cyclic_classes(opts).samples);
  bool blocks = curve.size() == 100;
  for (std::size_t i = 0; blocks && i < curve.size(); ++i) {
    blocks = curve[i].step == i + 1 && curve[i].iteration == (i < 50 ? 1 : 2);
  }
  return {failures == 0 && blocks, std::to_string(failures) + " axiom violations over 1000 fuzzed pairs; curve has " +
                                       std::to_string(curve.size()) + " rows in " +
                                       (blocks ? "two 50-row blocks" : "unexpected blocks")};
}

struct TstrArtifacts {
  std::filesystem::path model;
  std::filesystem::path real_train;
};

Outcome tstr_desk_scale(const test::TempDir& dir, TstrArtifacts& artifacts) {
  const auto start = Clock::now();
  artifacts.real_train = dir / "real_train.csv";
  artifacts.model = dir / "model.txt";
  const auto real_test = dir / "real_test.csv";
  const auto synthetic = dir / "synthetic_k2.csv";
  run("gen-data", "gen_cyclic.ini", {{"output.dataset", artifacts.real_train.string()}});
  run("gen-data", "gen_heldout.ini", {{"output.dataset", real_test.string()}});
  run("train", "train.ini",
      {{"data.input", artifacts.real_train.string()},
       {"output.model", artifacts.model.string()},
       {"output.loss_log", (dir / "loss.csv").string()}});
  run("sample", "sample_ddim_k2.ini",
      {{"predictor.model", artifacts.model.string()},
       {"output.samples", synthetic.string()},
       {"output.trajectory", (dir / "trajectory_k2.csv").string()}});
  const auto out = run("tstr", "tstr.ini",
                       {{"data.synthetic", synthetic.string()},
                        {"data.real", real_test.string()},
                        {"output.report", (dir / "tstr.txt").string()}});
  const double f1 = out.metrics.at("macro_f1");
  const double chance = out.metrics.at("chance");
  const double elapsed = seconds_since(start);
  return {f1 > 0.8 && f1 > chance && elapsed < 600.0,
          "macro-F1 " + fmt(f1) + " (> 0.8), chance " + fmt(chance) + ", margin " + fmt(f1 - chance) +
              ", gmean " + fmt(out.metrics.at("gmean")) + ", " + fmt(elapsed) + " s"};
}

// Maxima of the score strictly above both neighbours.
std::vector<std::size_t> local_maxima(const StepCurve& curve) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    if (curve[i].score > curve[i - 1].score && curve[i].score > curve[i + 1].score) out.push_back(curve[i].step);
  }
  return out;
}

Outcome step_curve_fixture(const test::TempDir& dir, const TstrArtifacts& artifacts, bool write_fixture) {
  if (!std::filesystem::exists(artifacts.model)) return {false, "no trained model"};
  const auto prefix = dir / "curves" / "k2";
  run("eval-curve", "eval_curve.ini",
      {{"predictor.model", artifacts.model.string()},
       {"data.real", artifacts.real_train.string()},
       {"output.curve_prefix", prefix.string()}});
  const auto produced = test::read_text(prefix.string() + "_class0_sample0.csv");
  if (write_fixture) test::write_text(kCurveFixture, produced);
  if (!std::filesystem::exists(kCurveFixture)) return {false, "fixture missing: " + kCurveFixture.string()};

  auto parse = [](const std::string& text) {
    StepCurve curve;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto cells = split(line, ',');
      curve.push_back({static_cast<std::size_t>(*parse_int(cells[0])), static_cast<int>(*parse_int(cells[1])),
                       *parse_double(cells[2]), static_cast<std::size_t>(*parse_int(cells[3]))});
    }
    return curve;
  };
  const auto got = parse(produced);
  const auto want = parse(test::read_text(kCurveFixture));
  bool same = got.size() == want.size() && produced.rfind("#sawtooth-stepcurve v1\n", 0) == 0;
  double worst = 0.0;
  for (std::size_t i = 0; same && i < got.size(); ++i) {
    same = got[i].step == want[i].step && got[i].iteration == want[i].iteration &&
           got[i].match_id == want[i].match_id;
    worst = std::max(worst, std::abs(got[i].score - want[i].score));
  }
  same = same && worst < 1e-9;

  std::string maxima;
  for (auto s : local_maxima(got)) maxima += (maxima.empty() ? "" : ",") + std::to_string(s);
  return {same, std::to_string(got.size()) + " rows match fixture (max score diff " + fmt(worst) +
                    "); local maxima at steps [" + maxima + "], pass boundary at 50"};
}

}  // namespace

int main(int argc, char** argv) {
  const bool write_fixture = argc > 1 && std::strcmp(argv[1], "--write-fixture") == 0;
  test::TempDir dir("acceptance");
  TstrArtifacts artifacts;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"NFE speedup", [&] { return nfe_speedup(dir); }},
      {"Sawtooth/DDIM equivalence", sawtooth_ddim_equivalence},
      {"Step-transport exactness", transport_exactness},
      {"DDPM equivalence", ddpm_equivalence},
      {"Gaussian-oracle distribution", [&] { return gaussian_oracle(dir); }},
      {"Gradient correctness", [&] { return gradient_correctness(dir); }},
      {"Scheduler validity", scheduler_validity},
      {"Similarity proxy", similarity_proxy},
      {"TSTR at desk scale", [&] { return tstr_desk_scale(dir, artifacts); }},
      {"Step-curve regression fixture", [&] { return step_curve_fixture(dir, artifacts, write_fixture); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome{false, ""};
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failed;
    std::cout << "criterion " << (i + 1) << " " << (outcome.pass ? "PASS" : "FAIL") << " ["
              << criteria[i].first << "] " << outcome.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
