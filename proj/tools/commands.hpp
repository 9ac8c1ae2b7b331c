#pragma once

// Subcommands of the crystalflow tool. Each returns the process exit code
// and throws ConfigError / ValidationError / IoError on failure.

#include <cstdint>
#include <optional>
#include <string>

#include "crystalflow/config.hpp"

namespace crystalflow::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kValidation = 3, kComparison = 4 };

struct Options {
  std::string config;
  std::string out;                       // empty: [output] directory
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  bool override_horizon = false;
  std::string input;                     // evolve: snapshot; compare: results JSON
  std::optional<double> time;            // evolve
  std::size_t index = 0;                 // sample
  bool timestamp = true;                 // write generated_at
};

int cmd_dispersion(const Options& opt);
int cmd_limits(const Options& opt);
int cmd_sample(const Options& opt);
int cmd_evolve(const Options& opt);
int cmd_current(const Options& opt);
int cmd_simulate(const Options& opt);
int cmd_halfspace(const Options& opt);
int cmd_compare(const Options& opt);

/// Config from --config with the command-line overrides applied.
RunConfig load_config(const Options& opt);

/// Parse argv and dispatch; maps exceptions to exit codes.
int run(int argc, char** argv);

}  // namespace crystalflow::cli
