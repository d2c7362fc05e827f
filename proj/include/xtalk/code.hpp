#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace xtalk {

using QubitId = std::uint32_t;

/// Integer lattice coordinate. Data qubits sit at odd-odd points and
/// ancillas at even-even points of the square [0, 2d] x [0, 2d]; y grows
/// southward.
struct Coord {
  int x = 0;
  int y = 0;
  auto operator<=>(const Coord&) const = default;
};

enum class Basis : std::uint8_t { X, Z };

struct Cnot {
  QubitId control = 0;
  QubitId target = 0;
  bool operator==(const Cnot&) const = default;
};

struct Ancilla {
  Coord coord;
  Basis basis = Basis::Z;
};

/// Rotated surface code of odd distance d.
///
/// Qubit ids: data qubits are 0 .. d^2-1 in row-major order, ancillas follow
/// as d^2 .. 2d^2-2, also row-major. X stabilizers own the weight-2 boundary
/// plaquettes on the top and bottom edges, Z stabilizers those on the left and
/// right. Logical X is the vertical column x = 1, logical Z the horizontal row
/// y = 1.
///
/// CNOT order per plaquette (offsets from the ancilla):
///   X: NW, NE, SW, SE   (ancilla is control)
///   Z: NW, SW, NE, SE   (ancilla is target)
/// so a hook X error from an X ancilla lands on a horizontal data pair and a
/// hook Z error from a Z ancilla on a vertical pair.
struct CodeLayout {
  int distance = 0;
  std::vector<Coord> data_qubits;
  std::vector<Ancilla> ancillas;
  /// Per ancilla: adjacent data qubits in CNOT order (2 or 4 entries).
  std::vector<std::vector<QubitId>> plaquettes;
  /// Per ancilla: partner data qubit in each of the 4 layers, if any.
  std::vector<std::array<std::optional<QubitId>, 4>> layer_partner;
  std::array<std::vector<Cnot>, 4> cnot_layers;
  std::vector<QubitId> logical_x_support;
  std::vector<QubitId> logical_z_support;

  std::size_t num_data() const { return data_qubits.size(); }
  std::size_t num_qubits() const { return data_qubits.size() + ancillas.size(); }
  QubitId ancilla_qubit(std::size_t ancilla_index) const {
    return static_cast<QubitId>(data_qubits.size() + ancilla_index);
  }
  bool is_data(QubitId q) const { return q < data_qubits.size(); }
  Coord coord(QubitId q) const;
  /// Ancilla index of the stabilizer a CNOT belongs to.
  std::size_t ancilla_of(const Cnot& gate) const;
  std::optional<QubitId> qubit_at(Coord c) const;
};

/// Site of a code qubit on the triangular lattice spanned by e1 = (a, 0) and
/// e2 = (a/2, a*sqrt(3)/2): u = (x + y)/2, v = (y - x)/2. Every plaquette edge
/// becomes a nearest-neighbour bond (+-e1 or +-e2).
struct LatticeSite {
  int u = 0;
  int v = 0;
  auto operator<=>(const LatticeSite&) const = default;
};
LatticeSite lattice_site(Coord c);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};
/// Planar position of a code qubit on the triangular lattice, in units of a.
Point2 lattice_position(Coord c);
double distance(Point2 a, Point2 b);

/// Builds the layout. Throws std::invalid_argument unless d is odd and >= 3.
CodeLayout build_rotated_surface_code(int d);

/// Ordered groups of simultaneously applied CNOTs for one syndrome round.
struct Schedule {
  std::vector<std::vector<Cnot>> groups;
  std::vector<int> layer_of_group;
  /// Largest group size.
  int k = 0;

  std::size_t num_gates() const;
};

enum class GroupingPolicy { raster, randomized };

/// Splits each CNOT layer into ceil(|layer| / k) groups of at most k gates.
/// Raster fills groups in the row-major ancilla order; randomized shuffles the
/// layer with `seed` first.
Schedule schedule_gates(const CodeLayout& layout, int k,
                        GroupingPolicy policy = GroupingPolicy::raster,
                        std::uint64_t seed = 0);

/// Groups gates by translation class on the triangular-lattice embedding with
/// a sublattice period of 2l sites: 8 l^2 groups per round (some may be empty
/// for small codes), ordered layer by layer.
Schedule sublattice_schedule(const CodeLayout& layout, int l);

/// Full-parallel schedule: one group per layer.
Schedule full_schedule(const CodeLayout& layout);

/// Maximum simultaneous pairs for a layer, d(d-1).
int full_parallelism(int d);

/// One gate per line: `layer group control_x control_y target_x target_y`.
std::string serialize_schedule(const CodeLayout& layout, const Schedule& schedule);
/// Qubit table: `id kind x y` with kind in {D, X, Z}.
std::string serialize_layout(const CodeLayout& layout);

// Pauli algebra on the code, used for structural checks.

/// Support of a Pauli operator as sets of qubits carrying an X and a Z factor.
struct PauliSupport {
  std::vector<QubitId> x;
  std::vector<QubitId> z;
};

PauliSupport stabilizer_operator(const CodeLayout& layout, std::size_t ancilla_index);
PauliSupport logical_x(const CodeLayout& layout);
PauliSupport logical_z(const CodeLayout& layout);
bool commutes(const PauliSupport& a, const PauliSupport& b);

}  // namespace xtalk
