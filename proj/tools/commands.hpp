#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xtalk/config.hpp"

namespace xtalk::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Command-line overrides. Seed and shots enter the config (and its hash);
/// the worker count and output directory do not.
struct RunOptions {
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> shots;
  std::optional<int> workers;
  bool quiet = false;
};

struct CommandResult {
  std::string config_hash;
  std::vector<std::string> files;  // written result tables, relative to out_dir
};

/// Config with overrides applied.
Config effective_config(Config cfg, const RunOptions& opts);
/// Hash of the config without keys that cannot change results.
std::string result_hash(const Config& cfg);
int resolve_workers(const Config& cfg, const RunOptions& opts);

/// Cartesian product over `sweep.<key> = <grid>` entries, last key fastest.
/// Each point is the base config with the swept keys set and the sweep
/// entries removed.
std::vector<Config> expand_grid(const Config& cfg);

CommandResult cmd_simulate(const Config& cfg, const RunOptions& opts);
CommandResult cmd_pulse(const Config& cfg, const RunOptions& opts);
CommandResult cmd_scaling(const Config& cfg, const RunOptions& opts);
CommandResult cmd_fit(const Config& cfg, const RunOptions& opts);

/// Dispatches and maps exceptions to exit codes (2 usage/config, 3 runtime)
/// with a one-line JSON error report on `err`.
int run_command(const std::string& name, const Config& cfg, const RunOptions& opts, std::ostream& err);

}  // namespace xtalk::cli
