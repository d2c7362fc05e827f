#include "xtalk/noise.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "xtalk/config.hpp"

namespace xtalk {
namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

Pauli role_pauli(const Cnot& gate, QubitId q) { return q == gate.control ? Pauli::X : Pauli::Z; }

MatrixCrosstalk load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open crosstalk table: " + path);
  MatrixCrosstalk m;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    QubitId a = 0;
    QubitId b = 0;
    double p = 0.0;
    if (!(fields >> a)) continue;
    if (!(fields >> b >> p)) throw ConfigError("crosstalk table line needs 'qubit_a qubit_b p': " + line);
    m.table[{std::min(a, b), std::max(a, b)}] = p;
  }
  return m;
}

}  // namespace

void NoiseParams::validate() const {
  if (!is_probability(p_g)) throw std::invalid_argument("p_g must lie in [0, 1]");
  if (!(T > 0.0)) throw std::invalid_argument("coherence time T must be positive");
  if (!(durations.two_qubit > 0.0 && durations.single_qubit > 0.0 && durations.measurement > 0.0)) {
    throw std::invalid_argument("durations must be positive");
  }
  if (const auto* u = std::get_if<UniformCrosstalk>(&crosstalk); u && !is_probability(u->p_c)) {
    throw std::invalid_argument("p_c must lie in [0, 1]");
  }
  if (const auto* pl = std::get_if<PowerLawCrosstalk>(&crosstalk)) {
    if (!(pl->gamma > 0.0)) throw std::invalid_argument("power-law gamma must be positive");
    if (!(pl->r_min > 0.0)) throw std::invalid_argument("power-law r_min must be positive");
    if (!is_probability(pl->c)) throw std::invalid_argument("power-law prefactor must lie in [0, 1]");
    if (pl->clamp && !is_probability(*pl->clamp)) throw std::invalid_argument("clamp must lie in [0, 1]");
  }
  if (const auto* m = std::get_if<MatrixCrosstalk>(&crosstalk)) {
    for (const auto& [pair, p] : m->table) {
      if (!is_probability(p)) throw std::invalid_argument("crosstalk table entries must lie in [0, 1]");
    }
  }
}

NoiseParams NoiseParams::from_config(const std::map<std::string, std::string>& section) {
  Config cfg;
  for (const auto& [k, v] : section) cfg.set(k, v);

  NoiseParams params;
  const auto p_all = cfg.find_double("p");
  params.p_g = cfg.get_double("p_g", p_all.value_or(0.0));

  if (cfg.has("T") && cfg.has("p_i")) throw ConfigError("give either noise.T or noise.p_i, not both");
  if (cfg.has("T")) {
    params.T = cfg.get_double("T");
  } else {
    auto p_i = cfg.find_double("p_i");
    if (!p_i) p_i = p_all;
    if (p_i) params.T = coherence_from_idle(*p_i);
  }

  const std::string model = cfg.get_string("crosstalk.model", "uniform");
  if (model == "uniform") {
    params.crosstalk = UniformCrosstalk{cfg.get_double("p_c", p_all.value_or(0.0))};
  } else if (model == "power_law") {
    PowerLawCrosstalk pl;
    pl.c = cfg.get_double("crosstalk.c", pl.c);
    pl.gamma = cfg.get_double("crosstalk.gamma", pl.gamma);
    pl.r_min = cfg.get_double("crosstalk.rmin", pl.r_min);
    pl.clamp = cfg.find_double("crosstalk.clamp");
    params.crosstalk = pl;
  } else if (model == "matrix") {
    params.crosstalk = load_matrix(cfg.get_string("crosstalk.table"));
  } else {
    throw ConfigError("unknown crosstalk.model '" + model + "' (uniform, power_law, matrix)");
  }

  const std::string kind = cfg.get_string("crosstalk.kind", "pauli");
  if (kind == "pauli") {
    params.crosstalk_kind = CrosstalkKind::pauli;
  } else if (kind == "depolarizing") {
    params.crosstalk_kind = CrosstalkKind::depolarizing;
  } else {
    throw ConfigError("unknown crosstalk.kind '" + kind + "' (pauli, depolarizing)");
  }

  params.durations.two_qubit = cfg.get_double("durations.two_qubit", params.durations.two_qubit);
  params.durations.single_qubit = cfg.get_double("durations.single_qubit", params.durations.single_qubit);
  params.durations.measurement = cfg.get_double("durations.measurement", params.durations.measurement);
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
  return params;
}

double idle_error_prob(double t, double T) {
  if (!(t >= 0.0)) throw std::invalid_argument("idle duration must be nonnegative");
  if (!(T > 0.0)) throw std::invalid_argument("coherence time must be positive");
  if (std::isinf(T)) return 0.0;
  return 0.75 * -std::expm1(-t / T);
}

double coherence_from_idle(double p_i) {
  if (!(p_i >= 0.0 && p_i < 0.75)) throw std::invalid_argument("p_i must lie in [0, 3/4)");
  if (p_i == 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / std::log1p(-4.0 * p_i / 3.0);
}

double crosstalk_prob(const PowerLawCrosstalk& model, double r_over_a) {
  if (!(r_over_a > 0.0)) throw std::invalid_argument("crosstalk distance must be positive");
  if (r_over_a < model.r_min) return model.clamp.value_or(model.c * std::pow(model.r_min, -model.gamma));
  return model.c * std::pow(r_over_a, -model.gamma);
}

double crosstalk_prob(const CrosstalkModel& model, const CodeLayout& layout, QubitId a, QubitId b) {
  if (a == b) throw std::invalid_argument("crosstalk endpoints must be distinct");
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, UniformCrosstalk>) {
          return m.p_c;
        } else if constexpr (std::is_same_v<M, PowerLawCrosstalk>) {
          const double r = distance(lattice_position(layout.coord(a)), lattice_position(layout.coord(b)));
          return crosstalk_prob(m, r);
        } else {
          const auto it = m.table.find({std::min(a, b), std::max(a, b)});
          if (it == m.table.end()) {
            throw std::out_of_range("crosstalk table has no entry for qubits " + std::to_string(a) + ", " +
                                    std::to_string(b));
          }
          return it->second;
        }
      },
      model);
}

std::vector<CrosstalkLocation> crosstalk_locations(const CodeLayout& layout, const std::vector<Cnot>& group,
                                                   const CrosstalkModel& model) {
  std::vector<CrosstalkLocation> out;
  out.reserve(2 * group.size() * (group.size() > 0 ? group.size() - 1 : 0));
  for (std::size_t g = 0; g < group.size(); ++g) {
    for (std::size_t h = g + 1; h < group.size(); ++h) {
      for (const QubitId a : {group[g].control, group[g].target}) {
        for (const QubitId b : {group[h].control, group[h].target}) {
          out.push_back({a, role_pauli(group[g], a), b, role_pauli(group[h], b), crosstalk_prob(model, layout, a, b)});
        }
      }
    }
  }
  return out;
}

double effective_crosstalk_per_gate(const CodeLayout& layout, const Schedule& schedule,
                                    const CrosstalkModel& model) {
  const std::size_t gates = schedule.num_gates();
  if (gates == 0) return 0.0;
  double total = 0.0;
  for (const auto& group : schedule.groups) {
    for (const auto& loc : crosstalk_locations(layout, group, model)) total += loc.probability;
  }
  return total / static_cast<double>(gates);
}

PauliChannel depolarize1(QubitId q, double p, ChannelKind kind) {
  PauliChannel ch;
  ch.q0 = q;
  ch.kind = kind;
  for (Pauli s : {Pauli::X, Pauli::Z, Pauli::Y}) ch.terms.push_back({s, Pauli::I, p / 3.0});
  return ch;
}

PauliChannel depolarize2(QubitId a, QubitId b, double p, ChannelKind kind) {
  PauliChannel ch;
  ch.q0 = a;
  ch.q1 = b;
  ch.kind = kind;
  for (unsigned i = 0; i < 4; ++i) {
    for (unsigned j = 0; j < 4; ++j) {
      if (i == 0 && j == 0) continue;
      ch.terms.push_back({static_cast<Pauli>(i), static_cast<Pauli>(j), p / 15.0});
    }
  }
  return ch;
}

std::uint32_t append_noisy_round(NoisyCircuit& circuit, const CodeLayout& layout, const Schedule& schedule,
                                 const NoiseParams& params, int round, bool measure_data) {
  const std::size_t n = layout.num_qubits();
  if (circuit.num_qubits < n) circuit.num_qubits = static_cast<std::uint32_t>(n);
  std::vector<char> busy(n, 0);
  int step = 0;

  auto idle_rest = [&](double dt) {
    const double p = idle_error_prob(dt, params.T);
    for (QubitId q = 0; q < n; ++q) {
      if (busy[q]) continue;
      auto ch = depolarize1(q, p, ChannelKind::idle);
      ch.round = round;
      ch.step = step;
      circuit.add_channel(std::move(ch));
    }
    circuit.tick(dt);
    std::fill(busy.begin(), busy.end(), 0);
    ++step;
  };

  auto basis_change = [&] {
    for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
      if (layout.ancillas[a].basis != Basis::X) continue;
      const QubitId q = layout.ancilla_qubit(a);
      circuit.hadamard(q);
      busy[q] = 1;
    }
    idle_rest(params.durations.single_qubit);
  };

  for (std::size_t a = 0; a < layout.ancillas.size(); ++a) circuit.reset(layout.ancilla_qubit(a));
  basis_change();

  for (const auto& group : schedule.groups) {
    for (const Cnot& gate : group) {
      if (gate.control >= n || gate.target >= n) throw std::invalid_argument("schedule references unknown qubit");
      if (busy[gate.control] || busy[gate.target]) throw std::invalid_argument("gates in a group overlap");
      busy[gate.control] = busy[gate.target] = 1;
      circuit.cnot(gate.control, gate.target);
      auto ch = depolarize2(gate.control, gate.target, params.p_g, ChannelKind::gate);
      ch.round = round;
      ch.step = step;
      circuit.add_channel(std::move(ch));
    }
    for (const auto& loc : crosstalk_locations(layout, group, params.crosstalk)) {
      PauliChannel ch;
      if (params.crosstalk_kind == CrosstalkKind::depolarizing) {
        ch = depolarize2(loc.qubit_a, loc.qubit_b, loc.probability, ChannelKind::crosstalk);
      } else {
        ch.q0 = loc.qubit_a;
        ch.q1 = loc.qubit_b;
        ch.kind = ChannelKind::crosstalk;
        ch.terms.push_back({loc.pauli_a, loc.pauli_b, loc.probability});
      }
      ch.round = round;
      ch.step = step;
      circuit.add_channel(std::move(ch));
    }
    idle_rest(params.durations.two_qubit);
  }

  basis_change();

  const std::uint32_t first = circuit.num_records;
  for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
    const QubitId q = layout.ancilla_qubit(a);
    circuit.measure(q);
    busy[q] = 1;
  }
  if (measure_data) {
    for (QubitId q = 0; q < layout.num_data(); ++q) {
      circuit.measure(q);
      busy[q] = 1;
    }
  }
  idle_rest(params.durations.measurement);
  return first;
}

NoisyCircuit attach_noise(const CodeLayout& layout, const Schedule& schedule, const NoiseParams& params) {
  params.validate();
  NoisyCircuit circuit;
  circuit.num_qubits = static_cast<std::uint32_t>(layout.num_qubits());
  for (QubitId q = 0; q < layout.num_data(); ++q) circuit.reset(q);
  append_noisy_round(circuit, layout, schedule, params, 0, false);
  circuit.rounds = 1;
  return circuit;
}

}  // namespace xtalk
