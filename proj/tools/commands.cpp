#include "commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "xtalk/decode.hpp"
#include "xtalk/noise.hpp"
#include "xtalk/pulse.hpp"
#include "xtalk/rng.hpp"
#include "xtalk/scaling.hpp"
#include "xtalk/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace xtalk::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string hash_line(const std::string& hash) { return "# config " + hash + "\n"; }

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& command, const Config& cfg, int workers,
                    const std::vector<std::string>& files, json extra = json::object()) {
  json m;
  m["command"] = command;
  m["config_hash"] = result_hash(cfg);
  m["config"] = cfg.values();
  m["seed"] = cfg.get_int("run.seed", 0);
  m["workers"] = workers;
  m["version"] = kVersion;
  m["compiler"] = __VERSION__;
  m["created_utc"] = utc_now();
  m["outputs"] = files;
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_file(dir / (command + "_manifest.json"), m.dump(2) + "\n");
}

fs::path prepare_out(const RunOptions& opts) {
  fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  return dir;
}

void log(const RunOptions& opts, const std::string& msg) {
  if (!opts.quiet) std::cerr << msg << '\n';
}

std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  return mix64(seed ^ mix64(0x5157a7e5ULL + index));
}

// --- simulate -------------------------------------------------------------

constexpr const char* kSimHeader = "d,k,p_g,p_i,p_c,shots,P_total,p_L,CI_low,CI_high,t_cycle,T_L\n";

Schedule schedule_for(const Config& pt, const CodeLayout& layout) {
  if (pt.has("code.l")) return sublattice_schedule(layout, static_cast<int>(pt.get_int("code.l")));
  const std::string grouping = pt.get_string("code.grouping", "raster");
  GroupingPolicy policy;
  if (grouping == "raster") {
    policy = GroupingPolicy::raster;
  } else if (grouping == "randomized") {
    policy = GroupingPolicy::randomized;
  } else {
    throw ConfigError("code.grouping must be raster or randomized");
  }
  const std::string k = pt.get_string("code.k", "full");
  if (k == "full") return full_schedule(layout);
  return schedule_gates(layout, static_cast<int>(parse_int(k)), policy,
                        static_cast<std::uint64_t>(pt.get_int("code.grouping_seed", 0)));
}

// Crosstalk column: the uniform value, else the per-gate effective value.
double crosstalk_column(const NoiseParams& np, const CodeLayout& layout, const Schedule& schedule) {
  if (const auto* u = std::get_if<UniformCrosstalk>(&np.crosstalk)) return u->p_c;
  return effective_crosstalk_per_gate(layout, schedule, np.crosstalk);
}

std::string simulate_row(const Config& pt, std::uint64_t seed, std::uint64_t shots, int workers) {
  const int d = static_cast<int>(pt.get_int("code.d", 3));
  const auto layout = build_rotated_surface_code(d);
  const auto schedule = schedule_for(pt, layout);
  const int rounds = static_cast<int>(pt.get_int("code.rounds", d));
  const auto np = NoiseParams::from_config(pt.section("noise"));
  const auto circuit = build_memory_circuit(layout, schedule, np, rounds);
  const auto est = estimate_logical_error_rate(circuit, shots, seed, workers);
  const double t_cycle = circuit.duration() / rounds;
  const double t_l = est.p_l >= 0.0 && est.p_l < 0.5 ? logical_coherence_time(est.p_l, t_cycle) : std::nan("");
  std::ostringstream row;
  row << d << ',' << schedule.k << ',' << num(np.p_g) << ',' << num(idle_error_prob(1.0, np.T)) << ','
      << num(crosstalk_column(np, layout, schedule)) << ',' << est.shots << ',' << num(est.p_total) << ','
      << num(est.p_l) << ',' << num(est.ci_low) << ',' << num(est.ci_high) << ',' << num(t_cycle) << ','
      << num(t_l) << '\n';
  return row.str();
}

// --- pulse ----------------------------------------------------------------

RegimeParams regime_params(const Config& cfg, bool fast) {
  RegimeParams p;
  if (fast) {
    p.d = 11;
    p.a = 8e-6;
    p.tau = 100e-6;
    p.n_seg = 600;
  } else {
    p.ease.robust_detuning = true;
    p.mu_band_offset = -0.3;
  }
  p.d = static_cast<int>(cfg.get_int("pulse.d", p.d));
  p.a = cfg.get_double("pulse.a", p.a);
  p.tau = cfg.get_double("pulse.tau", p.tau);
  p.n_seg = static_cast<int>(cfg.get_int("pulse.n_seg", p.n_seg));
  p.layer = static_cast<int>(cfg.get_int("pulse.layer", p.layer));
  p.omega_x = cfg.get_double("pulse.omega_x", p.omega_x);
  p.mu = cfg.get_double("pulse.mu", p.mu);
  p.mu_band_offset = cfg.get_double("pulse.mu_band_offset", p.mu_band_offset);
  p.ease.robust_detuning = cfg.get_int("pulse.robust_detuning", p.ease.robust_detuning ? 1 : 0) != 0;
  p.ease.amplitude_cap = cfg.get_double("pulse.amplitude_cap", p.ease.amplitude_cap);
  p.ease.null_rtol = cfg.get_double("pulse.null_rtol", p.ease.null_rtol);
  p.noise.amp_fraction = cfg.get_double("pulse.noise.amp_fraction", p.noise.amp_fraction);
  p.noise.detuning_halfwidth =
      2.0 * phys::kPi * cfg.get_double("pulse.noise.detuning_hz", p.noise.detuning_halfwidth / (2.0 * phys::kPi));
  p.noise.n_samples = static_cast<int>(cfg.get_int("pulse.noise.samples", p.noise.n_samples));
  p.noise.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 0));
  return p;
}

std::vector<std::pair<double, double>> untargeted_points(const CrosstalkReport& report) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& pc : report.pairs) {
    if (!pc.targeted && pc.pc_mean > 0.0) pts.push_back({pc.r_over_a, pc.pc_mean});
  }
  return pts;
}

// --- fit ------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ConfigError("input table has no column '" + name + "'");
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = split_csv(line);
    } else {
      t.rows.push_back(split_csv(line));
      if (t.rows.back().size() != t.header.size()) throw ConfigError("ragged row in " + path);
    }
  }
  if (t.header.empty()) throw ConfigError("empty table " + path);
  return t;
}

}  // namespace

Config effective_config(Config cfg, const RunOptions& opts) {
  if (opts.seed) cfg.set("run.seed", std::to_string(*opts.seed));
  if (opts.shots) cfg.set("run.shots", std::to_string(*opts.shots));
  return cfg;
}

std::string result_hash(const Config& cfg) {
  Config c = cfg;
  c.erase("run.workers");
  c.erase("run.out");
  return c.hash();
}

int resolve_workers(const Config& cfg, const RunOptions& opts) {
  if (opts.workers) {
    if (*opts.workers < 1) throw UsageError("--workers must be >= 1");
    return *opts.workers;
  }
  if (cfg.has("run.workers")) {
    const auto w = cfg.get_int("run.workers");
    if (w < 1) throw ConfigError("run.workers must be >= 1");
    return static_cast<int>(w);
  }
  return default_workers();
}

std::vector<Config> expand_grid(const Config& cfg) {
  const auto axes_raw = cfg.section("sweep");
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  Config base = cfg;
  for (const auto& [key, spec] : axes_raw) {
    base.erase("sweep." + key);
    std::vector<std::string> values;
    if (spec.find(':') != std::string::npos) {
      for (double v : parse_grid(spec)) values.push_back(num(v));
    } else {
      std::istringstream s(spec);
      std::string item;
      while (std::getline(s, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) values.push_back(item.substr(b, e - b + 1));
      }
    }
    if (values.empty()) throw UsageError("sweep." + key + " is an empty grid");
    axes.push_back({key, values});
  }
  std::vector<Config> out{base};
  for (const auto& [key, values] : axes) {
    std::vector<Config> next;
    for (const auto& c : out) {
      for (const auto& v : values) {
        Config n = c;
        n.set(key, v);
        next.push_back(std::move(n));
      }
    }
    out = std::move(next);
  }
  return out;
}

CommandResult cmd_simulate(const Config& cfg, const RunOptions& opts) {
  const int workers = resolve_workers(cfg, opts);
  const auto points = expand_grid(cfg);
  const auto shots = static_cast<std::uint64_t>(cfg.get_int("run.shots", 10000));
  if (shots < 1) throw ConfigError("run.shots must be >= 1");
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 0));
  const std::string hash = result_hash(cfg);
  const auto dir = prepare_out(opts);
  const fs::path final_path = dir / "simulate.csv";
  const fs::path partial_path = dir / "simulate.partial.csv";

  // Resume from a checkpoint written under the same config hash.
  std::string body;
  std::size_t done = 0;
  if (fs::exists(partial_path)) {
    const auto text = read_file(partial_path);
    if (text.rfind(hash_line(hash) + kSimHeader, 0) == 0) {
      body = text;
      done = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 2;
      log(opts, "resuming after " + std::to_string(done) + " completed points");
    }
  }
  if (body.empty()) {
    body = hash_line(hash) + kSimHeader;
    write_file(partial_path, body);
  }
  if (done > points.size()) throw std::runtime_error("checkpoint has more rows than the grid");
  for (std::size_t i = done; i < points.size(); ++i) {
    log(opts, "point " + std::to_string(i + 1) + "/" + std::to_string(points.size()));
    const auto row = simulate_row(points[i], point_seed(seed, i), shots, workers);
    body += row;
    std::ofstream(partial_path, std::ios::app | std::ios::binary) << row;
  }
  fs::rename(partial_path, final_path);
  write_manifest(dir, "simulate", cfg, workers, {"simulate.csv"}, {{"grid_points", points.size()}});
  return {hash, {"simulate.csv"}};
}

CommandResult cmd_pulse(const Config& cfg, const RunOptions& opts) {
  const int workers = resolve_workers(cfg, opts);
  const std::string regime = cfg.get_string("pulse.regime", "slow");
  if (regime != "slow" && regime != "fast") throw ConfigError("pulse.regime must be slow or fast");
  const bool fast = regime == "fast";
  auto params = regime_params(cfg, fast);
  params.noise.workers = workers;
  const std::string hash = result_hash(cfg);
  const auto dir = prepare_out(opts);

  log(opts, "designing " + regime + "-regime pulses");
  const auto res = fast ? run_fast_regime(params) : run_slow_regime(params);

  write_file(dir / "pulse.txt", pulse_to_string(res.pulse));
  write_file(dir / "crosstalk.csv", hash_line(hash) + res.report.to_csv());

  std::ostringstream bins;
  bins << hash_line(hash) << "r_over_a,count,pc_intrinsic,pc_noise,pc_mean\n";
  for (const auto& b : res.report.bins()) {
    bins << num(b.r_over_a) << ',' << b.count << ',' << num(b.pc_intrinsic) << ',' << num(b.pc_noise) << ','
         << num(b.pc_mean) << '\n';
  }
  write_file(dir / "crosstalk_bins.csv", bins.str());

  std::ostringstream summary;
  summary << hash_line(hash) << "key,value\n";
  auto kv = [&](const std::string& k, double v) { summary << k << ',' << num(v) << '\n'; };
  kv("epsilon", res.epsilon);
  kv("mu", res.pulse.mu);
  kv("alpha_relative", res.residual.alpha_relative());
  kv("theta_target_err", res.residual.theta_target_err);
  kv("theta_untargeted_max", res.residual.theta_untargeted_max);
  kv("max_rabi_hz", res.residual.max_rabi / (2.0 * phys::kPi));
  kv("mean_rabi_hz", res.residual.mean_rabi / (2.0 * phys::kPi));
  kv("mean_untargeted_pc", res.report.mean_untargeted_pc());
  kv("mean_gate_infidelity", res.report.mean_gate_infidelity());
  // Mode occupation is not pinned; report how the infidelity moves with it.
  for (double nbar : {0.0, 0.5, 1.0, 5.0}) kv("mean_gate_infidelity_nbar_" + num(nbar), res.report.mean_gate_infidelity_at(nbar));

  // Crosstalk model for feeding back into simulate.
  std::ostringstream model;
  model << "# config " << hash << "\n";
  const double r_min = cfg.get_double("pulse.fit.r_min", 4.0);
  if (fast) {
    const auto fit = fit_power_law(untargeted_points(res.report), r_min);
    kv("fit_c", fit.c);
    kv("fit_gamma", fit.gamma);
    kv("fit_gamma_stderr", fit.gamma_stderr);
    kv("fit_log_residual", fit.residual);
    kv("fit_points", static_cast<double>(fit.n_points));
    model << "noise.crosstalk.model = power_law\nnoise.crosstalk.c = " << num(fit.c)
          << "\nnoise.crosstalk.gamma = " << num(fit.gamma) << "\nnoise.crosstalk.rmin = " << num(r_min) << '\n';
  } else {
    model << "noise.crosstalk.model = uniform\nnoise.p_c = " << num(res.report.mean_untargeted_pc()) << '\n';
  }
  write_file(dir / "pulse_summary.csv", summary.str());
  write_file(dir / "crosstalk_model.cfg", model.str());
  const std::vector<std::string> files{"pulse.txt", "crosstalk.csv", "crosstalk_bins.csv", "pulse_summary.csv",
                                       "crosstalk_model.cfg"};
  write_manifest(dir, "pulse", cfg, workers, files);
  return {hash, files};
}

CommandResult cmd_scaling(const Config& cfg, const RunOptions& opts) {
  BoundParams p;
  p.p_g = cfg.get_double("scaling.p_g", 0.0);
  p.T = cfg.get_double("scaling.T", p.T);
  p.crosstalk.p_c = cfg.get_double("scaling.p_c", 0.0);
  const std::string xt = cfg.get_string("scaling.crosstalk", "uniform");
  if (xt == "uniform") {
    p.crosstalk.kind = CrosstalkScaling::Kind::uniform;
  } else if (xt == "fixed") {
    p.crosstalk.kind = CrosstalkScaling::Kind::fixed;
  } else {
    throw ConfigError("scaling.crosstalk must be uniform or fixed");
  }
  const std::string scheme = cfg.get_string("scaling.scheme", "optimal");
  if (scheme == "optimal") {
    p.scheme = ParallelismScheme::optimal;
  } else if (scheme == "d_minus_1") {
    p.scheme = ParallelismScheme::d_minus_1;
  } else if (scheme == "sublattice") {
    p.scheme = ParallelismScheme::sublattice;
  } else {
    throw ConfigError("scaling.scheme must be optimal, d_minus_1 or sublattice");
  }
  p.sublattice_l = static_cast<int>(cfg.get_int("scaling.l", p.sublattice_l));
  p.fit.A = cfg.get_double("fit.A", p.fit.A);
  p.fit.p_th = cfg.get_double("fit.p_th", p.fit.p_th);
  p.fit.B = cfg.get_double("fit.B", p.fit.B);
  p.fit.p_th_prime = cfg.get_double("fit.p_th_prime", p.fit.p_th_prime);

  const std::string d_spec = cfg.get_string("scaling.d", "");
  if (d_spec.find_first_not_of(" \t") == std::string::npos) throw UsageError("scaling.d is an empty grid");
  const std::vector<double> grid = parse_grid(d_spec);
  std::vector<BoundPoint> table;
  for (double dv : grid) {
    const int d = static_cast<int>(std::lround(dv));
    if (d != dv) throw ConfigError("scaling.d must hold integers");
    table.push_back(evaluate_bound(p, d));
  }
  const std::string hash = result_hash(cfg);
  const auto dir = prepare_out(opts);
  write_file(dir / "scaling.csv", hash_line(hash) + bound_table_csv(table));
  std::vector<std::string> files{"scaling.csv"};
  json extra = json::object();
  if (cfg.has("scaling.target")) {
    const double target = cfg.get_double("scaling.target");
    const int d_max = static_cast<int>(cfg.get_int("scaling.d_max", 201));
    const int d = min_distance_for_target(p, target, d_max);
    const auto pt = evaluate_bound(p, d);
    std::ostringstream s;
    s << hash_line(hash) << "target,d,k,t,p_tilde_c,bound\n"
      << num(target) << ',' << d << ',' << pt.k << ',' << num(pt.t) << ',' << num(pt.p_tilde_c) << ','
      << num(pt.bound) << '\n';
    write_file(dir / "min_distance.csv", s.str());
    files.push_back("min_distance.csv");
    extra["min_distance"] = d;
  }
  write_manifest(dir, "scaling", cfg, 1, files, extra);
  return {hash, files};
}

CommandResult cmd_fit(const Config& cfg, const RunOptions& opts) {
  const std::string input = cfg.get_string("fit.input", "");
  if (input.empty()) throw UsageError("fit.input names the simulate table to fit");
  const auto table = read_csv(input);
  const auto x_col = table.column(cfg.get_string("fit.x", "p_g"));
  const auto d_col = table.column("d");
  const auto pl_col = table.column("p_L");
  const auto lo_col = table.column("CI_low");
  const auto hi_col = table.column("CI_high");
  const double p_lo = cfg.get_double("fit.p_lo", 0.0);
  const double p_hi = cfg.get_double("fit.p_hi", std::numeric_limits<double>::infinity());

  std::map<int, std::vector<RatePoint>> curves;
  for (const auto& r : table.rows) {
    curves[static_cast<int>(parse_int(r[d_col]))].push_back(
        {parse_double(r[x_col]), parse_double(r[pl_col]), parse_double(r[lo_col]), parse_double(r[hi_col])});
  }
  const std::string hash = result_hash(cfg);
  std::ostringstream out;
  out << hash_line(hash) << "d,n_points,slope,slope_stderr,c_fixed_power,power,p_star\n";
  std::vector<std::pair<int, std::vector<RatePoint>>> all;
  for (const auto& [d, pts] : curves) {
    all.push_back({d, pts});
    const double power = cfg.get_double("fit.power", 0.5 * (d + 1));
    std::vector<RatePoint> window;
    for (const auto& q : pts) {
      if (q.p >= p_lo && q.p <= p_hi) window.push_back(q);
    }
    out << d << ',';
    try {
      const auto s = measure_slope(window);
      out << s.n_points << ',' << num(s.slope) << ',' << num(s.slope_stderr) << ',';
    } catch (const std::invalid_argument&) {
      out << "0,nan,nan,";
    }
    try {
      const double c = fit_fixed_power(window, power);
      out << num(c) << ',' << num(power) << ',' << num(power == 1.0 ? std::nan("") : pseudo_threshold(c, power))
          << '\n';
    } catch (const std::invalid_argument&) {
      out << "nan," << num(power) << ",nan\n";
    }
  }
  std::vector<std::string> files{"fit.csv"};
  const auto dir = prepare_out(opts);
  write_file(dir / "fit.csv", out.str());
  if (all.size() >= 2) {
    const auto th = fit_threshold(all);
    const auto [wlo, whi] = below_threshold_window(th.p_th);
    // Crossing of the two smallest distances, when sampled on one grid.
    double cross = std::nan("");
    try {
      cross = curve_crossing(all[0].second, all[1].second);
    } catch (const std::invalid_argument&) {
    }
    std::ostringstream t;
    t << hash_line(hash) << "A,p_th,window_lo,window_hi,p_cross\n"
      << num(th.A) << ',' << num(th.p_th) << ',' << num(wlo) << ',' << num(whi) << ',' << num(cross) << '\n';
    write_file(dir / "threshold.csv", t.str());
    files.push_back("threshold.csv");
  }
  write_manifest(dir, "fit", cfg, 1, files);
  return {hash, files};
}

int run_command(const std::string& name, const Config& cfg_in, const RunOptions& opts, std::ostream& err) {
  auto report = [&](const char* kind, const std::string& msg, json extra = json::object()) {
    json j{{"error", kind}, {"command", name}, {"message", msg}};
    for (auto& [k, v] : extra.items()) j[k] = v;
    err << j.dump() << '\n';
  };
  try {
    const Config cfg = effective_config(cfg_in, opts);
    if (name == "simulate") {
      cmd_simulate(cfg, opts);
    } else if (name == "pulse") {
      cmd_pulse(cfg, opts);
    } else if (name == "scaling") {
      cmd_scaling(cfg, opts);
    } else if (name == "fit") {
      cmd_fit(cfg, opts);
    } else {
      throw UsageError("unknown command '" + name + "'");
    }
    return 0;
  } catch (const UsageError& e) {
    report("usage", e.what());
    return 2;
  } catch (const ConfigError& e) {
    report("config", e.what());
    return 2;
  } catch (const NoThresholdError& e) {
    report("no_threshold", e.what(), {{"base", e.base()}});
    return 3;
  } catch (const NullSpaceExhausted& e) {
    report("null_space_exhausted", e.what());
    return 3;
  } catch (const InfeasibleTarget& e) {
    report("infeasible_target", e.what());
    return 3;
  } catch (const DesignCheckFailed& e) {
    report("design_check_failed", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    report("invalid_argument", e.what());
    return 2;
  } catch (const std::exception& e) {
    report("runtime", e.what());
    return 3;
  }
}

}  // namespace xtalk::cli
