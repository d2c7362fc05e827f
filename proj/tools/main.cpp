#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Surface-code crosstalk experiments: simulate, pulse, scaling, fit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  xtalk::cli::RunOptions opts;
  std::uint64_t seed = 0;
  std::uint64_t shots = 0;
  int workers = 0;

  for (const char* name : {"simulate", "pulse", "scaling", "fit"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Config file (flat dotted keys)")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "Override a key: --set noise.p=1e-3");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--shots", shots, "Shots per grid point")->check(CLI::PositiveNumber);
    sub->add_option("--workers", workers, "Worker threads (default: XTALK_WORKERS or all cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", opts.out_dir, "Output directory");
    sub->add_flag("--quiet", opts.quiet, "No progress on stderr");
  }
  CLI11_PARSE(app, argc, argv);

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--shots")) opts.shots = shots;
  if (sub->count("--workers")) opts.workers = workers;

  xtalk::Config cfg;
  try {
    if (!config_path.empty()) cfg = xtalk::Config::load(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw xtalk::ConfigError("--set expects key=value, got '" + s + "'");
      auto trimmed = xtalk::Config::parse(s);
      for (const auto& [k, v] : trimmed.values()) cfg.set(k, v);
    }
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"command", sub->get_name()}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  return xtalk::cli::run_command(sub->get_name(), cfg, opts, std::cerr);
}
