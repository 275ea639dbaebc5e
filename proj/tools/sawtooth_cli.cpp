#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sawtooth/commands.hpp"
#include "sawtooth/config.hpp"
#include "sawtooth/data.hpp"
#include "sawtooth/text_io.hpp"

namespace {

const char* describe(const std::string& name) {
  if (name == "gen-data") return "Generate a synthetic labelled dataset";
  if (name == "train") return "Train one denoiser per class";
  if (name == "sample") return "Draw samples with ddpm, ddim or sawtooth";
  if (name == "eval-curve") return "Per-step nearest-real-match similarity curves";
  if (name == "tstr") return "Train on synthetic, test on real";
  if (name == "bench") return "Compare ddpm and sawtooth cost";
  if (name == "gradcheck") return "Finite-difference check of the denoiser gradients";
  return "";
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << sawtooth::format_error_line(kind, message) << '\n';
  return kind == "config" ? 2 : kind == "input" ? 3 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion sampling experiments for multivariate time series"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  for (const auto& name : sawtooth::command_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("config", config_path, "Run configuration file")->required();
    sub->add_option("--seed", seed, "Override run.seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto config = sawtooth::RunConfig::load(config_path);
    if (seed) config.set("run.seed", std::to_string(*seed));
    const auto result = sawtooth::run_command(command, config);
    for (const auto& file : result.files) std::cout << "wrote " << file.string() << '\n';
    for (const auto& [key, value] : result.metrics) {
      std::cout << key << " = " << sawtooth::format_double(value) << '\n';
    }
    return 0;
  } catch (const sawtooth::ConfigError& e) {
    return fail("config", e.what());
  } catch (const sawtooth::CsvError& e) {
    return fail("input", e.what());
  } catch (const sawtooth::InputError& e) {
    return fail("input", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
}
