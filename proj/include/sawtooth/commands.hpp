#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sawtooth/config.hpp"

namespace sawtooth {

/// An input file (dataset, model) is unreadable or inconsistent with the config.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files written plus the headline numbers of a run.
struct CommandOutput {
  std::vector<std::filesystem::path> files;
  std::map<std::string, double> metrics;
};

// Each command reads and validates its whole configuration first (ConfigError
// lists every problem), then does the work, then writes outputs atomically.
CommandOutput cmd_gen_data(RunConfig& config);
CommandOutput cmd_train(RunConfig& config);
CommandOutput cmd_sample(RunConfig& config);
CommandOutput cmd_eval_curve(RunConfig& config);
CommandOutput cmd_tstr(RunConfig& config);
CommandOutput cmd_bench(RunConfig& config);
CommandOutput cmd_gradcheck(RunConfig& config);

/// Names accepted by run_command, in help order.
const std::vector<std::string>& command_names();

/// Dispatches by name. Unknown names raise ConfigError.
CommandOutput run_command(const std::string& name, RunConfig& config);

/// `error kind=<kind> message="<text>"` on one line.
std::string format_error_line(const std::string& kind, const std::string& message);

}  // namespace sawtooth
