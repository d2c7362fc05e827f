#include "xtalk/code.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "xtalk/rng.hpp"

namespace xtalk {
namespace {

// Plaquette offsets per layer.
constexpr std::array<Coord, 4> kXOrder{{{-1, -1}, {1, -1}, {-1, 1}, {1, 1}}};
constexpr std::array<Coord, 4> kZOrder{{{-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};

bool ancilla_exists(int x, int y, int d) {
  const int n = 2 * d;
  if (x < 0 || y < 0 || x > n || y > n) return false;
  const bool corner = (x == 0 || x == n) && (y == 0 || y == n);
  if (corner) return false;
  const Basis basis = ((x / 2 + y / 2) % 2 == 0) ? Basis::X : Basis::Z;
  if (y == 0 || y == n) return basis == Basis::X;
  if (x == 0 || x == n) return basis == Basis::Z;
  return true;
}

int floor_mod(int a, int m) { return ((a % m) + m) % m; }

}  // namespace

LatticeSite lattice_site(Coord c) { return {(c.x + c.y) / 2, (c.y - c.x) / 2}; }

Point2 lattice_position(Coord c) {
  // (x + y) and (y - x) are even for every code qubit, so use them directly.
  const double u = 0.5 * (c.x + c.y);
  const double v = 0.5 * (c.y - c.x);
  return {u + 0.5 * v, v * std::sqrt(3.0) / 2.0};
}

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Coord CodeLayout::coord(QubitId q) const {
  if (q < data_qubits.size()) return data_qubits[q];
  const std::size_t a = q - data_qubits.size();
  if (a >= ancillas.size()) throw std::out_of_range("qubit id out of range");
  return ancillas[a].coord;
}

std::size_t CodeLayout::ancilla_of(const Cnot& gate) const {
  const QubitId anc = is_data(gate.control) ? gate.target : gate.control;
  if (is_data(anc)) throw std::invalid_argument("CNOT does not touch an ancilla");
  return anc - data_qubits.size();
}

std::optional<QubitId> CodeLayout::qubit_at(Coord c) const {
  const int d = distance;
  if (c.x % 2 != 0 && c.y % 2 != 0) {
    if (c.x < 1 || c.y < 1 || c.x > 2 * d - 1 || c.y > 2 * d - 1) return std::nullopt;
    return static_cast<QubitId>(((c.y - 1) / 2) * d + (c.x - 1) / 2);
  }
  const auto it = std::lower_bound(ancillas.begin(), ancillas.end(), c, [](const Ancilla& a, Coord key) {
    return std::pair(a.coord.y, a.coord.x) < std::pair(key.y, key.x);
  });
  if (it == ancillas.end() || it->coord != c) return std::nullopt;
  return ancilla_qubit(static_cast<std::size_t>(it - ancillas.begin()));
}

CodeLayout build_rotated_surface_code(int d) {
  if (d < 3 || d % 2 == 0) {
    throw std::invalid_argument("code distance must be an odd integer >= 3, got " + std::to_string(d));
  }
  CodeLayout layout;
  layout.distance = d;
  for (int y = 1; y < 2 * d; y += 2) {
    for (int x = 1; x < 2 * d; x += 2) layout.data_qubits.push_back({x, y});
  }
  for (int y = 0; y <= 2 * d; y += 2) {
    for (int x = 0; x <= 2 * d; x += 2) {
      if (!ancilla_exists(x, y, d)) continue;
      layout.ancillas.push_back({{x, y}, ((x / 2 + y / 2) % 2 == 0) ? Basis::X : Basis::Z});
    }
  }

  layout.plaquettes.resize(layout.ancillas.size());
  layout.layer_partner.resize(layout.ancillas.size());
  for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
    const auto& anc = layout.ancillas[a];
    const auto& order = anc.basis == Basis::X ? kXOrder : kZOrder;
    const QubitId anc_q = layout.ancilla_qubit(a);
    for (int layer = 0; layer < 4; ++layer) {
      const Coord c{anc.coord.x + order[layer].x, anc.coord.y + order[layer].y};
      const auto data = layout.qubit_at(c);
      if (!data) continue;
      layout.plaquettes[a].push_back(*data);
      layout.layer_partner[a][layer] = *data;
      const Cnot gate = anc.basis == Basis::X ? Cnot{anc_q, *data} : Cnot{*data, anc_q};
      layout.cnot_layers[layer].push_back(gate);
    }
  }

  for (int y = 1; y < 2 * d; y += 2) layout.logical_x_support.push_back(*layout.qubit_at({1, y}));
  for (int x = 1; x < 2 * d; x += 2) layout.logical_z_support.push_back(*layout.qubit_at({x, 1}));
  return layout;
}

std::size_t Schedule::num_gates() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

int full_parallelism(int d) { return d * (d - 1); }

Schedule schedule_gates(const CodeLayout& layout, int k, GroupingPolicy policy, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("parallelism k must be >= 1");
  Schedule schedule;
  for (int layer = 0; layer < 4; ++layer) {
    std::vector<Cnot> gates = layout.cnot_layers[layer];
    if (policy == GroupingPolicy::randomized) {
      auto rng = CounterRng::keyed(seed, 0x5c4ed01e, static_cast<std::uint64_t>(layer));
      for (std::size_t i = gates.size(); i > 1; --i) {
        std::swap(gates[i - 1], gates[rng.below(i)]);
      }
    }
    for (std::size_t start = 0; start < gates.size(); start += static_cast<std::size_t>(k)) {
      const std::size_t stop = std::min(gates.size(), start + static_cast<std::size_t>(k));
      schedule.groups.emplace_back(gates.begin() + static_cast<std::ptrdiff_t>(start),
                                   gates.begin() + static_cast<std::ptrdiff_t>(stop));
      schedule.layer_of_group.push_back(layer);
      schedule.k = std::max(schedule.k, static_cast<int>(stop - start));
    }
  }
  return schedule;
}

Schedule full_schedule(const CodeLayout& layout) {
  return schedule_gates(layout, full_parallelism(layout.distance));
}

Schedule sublattice_schedule(const CodeLayout& layout, int l) {
  if (l < 1) throw std::invalid_argument("sublattice size l must be >= 1");
  const int period = 2 * l;
  Schedule schedule;
  for (int layer = 0; layer < 4; ++layer) {
    // Ancilla sites have u + v even, so each cell holds 2 l^2 ancilla classes.
    std::map<std::pair<int, int>, std::vector<Cnot>> classes;
    for (int cu = 0; cu < period; ++cu) {
      for (int cv = 0; cv < period; ++cv) {
        if ((cu + cv) % 2 == 0) classes[{cu, cv}];
      }
    }
    for (const Cnot& gate : layout.cnot_layers[layer]) {
      const auto site = lattice_site(layout.ancillas[layout.ancilla_of(gate)].coord);
      classes[{floor_mod(site.u, period), floor_mod(site.v, period)}].push_back(gate);
    }
    for (auto& [key, gates] : classes) {
      schedule.k = std::max(schedule.k, static_cast<int>(gates.size()));
      schedule.groups.push_back(std::move(gates));
      schedule.layer_of_group.push_back(layer);
    }
  }
  return schedule;
}

std::string serialize_layout(const CodeLayout& layout) {
  std::ostringstream out;
  out << "# rotated surface code d=" << layout.distance << "\n"
      << "# data at odd-odd (x,y), ancillas at even-even, y grows southward\n"
      << "# id kind x y\n";
  for (QubitId q = 0; q < layout.num_qubits(); ++q) {
    char kind = 'D';
    if (!layout.is_data(q)) kind = layout.ancillas[q - layout.num_data()].basis == Basis::X ? 'X' : 'Z';
    const Coord c = layout.coord(q);
    out << q << ' ' << kind << ' ' << c.x << ' ' << c.y << '\n';
  }
  return out.str();
}

std::string serialize_schedule(const CodeLayout& layout, const Schedule& schedule) {
  std::ostringstream out;
  out << "# d=" << layout.distance << " groups=" << schedule.groups.size() << " k=" << schedule.k << "\n"
      << "# layer group control_x control_y target_x target_y\n";
  for (std::size_t g = 0; g < schedule.groups.size(); ++g) {
    for (const Cnot& gate : schedule.groups[g]) {
      const Coord c = layout.coord(gate.control);
      const Coord t = layout.coord(gate.target);
      out << schedule.layer_of_group[g] << ' ' << g << ' ' << c.x << ' ' << c.y << ' ' << t.x << ' ' << t.y
          << '\n';
    }
  }
  return out.str();
}

PauliSupport stabilizer_operator(const CodeLayout& layout, std::size_t ancilla_index) {
  PauliSupport op;
  auto& side = layout.ancillas.at(ancilla_index).basis == Basis::X ? op.x : op.z;
  side = layout.plaquettes[ancilla_index];
  return op;
}

PauliSupport logical_x(const CodeLayout& layout) { return {layout.logical_x_support, {}}; }
PauliSupport logical_z(const CodeLayout& layout) { return {{}, layout.logical_z_support}; }

bool commutes(const PauliSupport& a, const PauliSupport& b) {
  auto overlap = [](std::vector<QubitId> s, std::vector<QubitId> t) {
    std::sort(s.begin(), s.end());
    std::sort(t.begin(), t.end());
    std::vector<QubitId> both;
    std::set_intersection(s.begin(), s.end(), t.begin(), t.end(), std::back_inserter(both));
    return both.size();
  };
  return (overlap(a.x, b.z) + overlap(a.z, b.x)) % 2 == 0;
}

}  // namespace xtalk
