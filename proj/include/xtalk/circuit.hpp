#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "xtalk/code.hpp"

namespace xtalk {

/// Single-qubit Pauli encoded as (x bit) | (z bit << 1): I=0, X=1, Z=2, Y=3.
enum class Pauli : std::uint8_t { I = 0, X = 1, Z = 2, Y = 3 };

constexpr bool has_x(Pauli p) { return (static_cast<unsigned>(p) & 1U) != 0; }
constexpr bool has_z(Pauli p) { return (static_cast<unsigned>(p) & 2U) != 0; }
char pauli_char(Pauli p);

inline constexpr QubitId kNoQubit = std::numeric_limits<QubitId>::max();

/// One component of a Pauli channel: apply (first, second) with probability.
struct PauliTerm {
  Pauli first = Pauli::I;
  Pauli second = Pauli::I;
  double probability = 0.0;
};

enum class ChannelKind : std::uint8_t { gate, idle, crosstalk };

/// Mutually exclusive Pauli components on one or two qubits.
struct PauliChannel {
  QubitId q0 = kNoQubit;
  QubitId q1 = kNoQubit;  // kNoQubit for single-qubit channels
  std::vector<PauliTerm> terms;
  ChannelKind kind = ChannelKind::gate;
  int round = 0;
  int step = 0;

  double total_probability() const;
};

enum class OpKind : std::uint8_t { reset, hadamard, cnot, measure, channel, tick };

/// `a`/`b` are qubits; `index` is the record index (measure), channel index
/// (channel) or tick index (tick).
struct Op {
  OpKind kind = OpKind::tick;
  QubitId a = kNoQubit;
  QubitId b = kNoQubit;
  std::uint32_t index = 0;
};

/// Ordered Clifford circuit with Z-basis resets and measurements, annotated
/// with Pauli channels, detectors, and one observable.
struct NoisyCircuit {
  std::uint32_t num_qubits = 0;
  std::vector<Op> ops;
  std::vector<PauliChannel> channels;
  std::vector<double> tick_durations;
  std::uint32_t num_records = 0;
  std::vector<std::vector<std::uint32_t>> detectors;
  /// Stabilizer type behind each detector; empty when untyped.
  std::vector<Basis> detector_basis;
  std::vector<std::uint32_t> observable;
  int rounds = 0;

  void reset(QubitId q) { ops.push_back({OpKind::reset, q, kNoQubit, 0}); }
  void hadamard(QubitId q) { ops.push_back({OpKind::hadamard, q, kNoQubit, 0}); }
  void cnot(QubitId c, QubitId t) { ops.push_back({OpKind::cnot, c, t, 0}); }
  std::uint32_t measure(QubitId q);
  /// Appends the channel unless its total probability is zero.
  void add_channel(PauliChannel channel);
  void tick(double duration);

  std::size_t num_detectors() const { return detectors.size(); }
  /// Sum of tick durations.
  double duration() const;

  /// Human-readable op list, one op per line.
  std::string dump() const;
};

/// Symbolic Pauli frame over all qubits of a circuit.
struct PauliFrame {
  std::vector<std::uint8_t> x;
  std::vector<std::uint8_t> z;

  explicit PauliFrame(std::size_t n = 0) : x(n, 0), z(n, 0) {}
  void apply(QubitId q, Pauli p);
  Pauli at(QubitId q) const;
  std::size_t weight() const;
};

/// Propagates `frame` through ops [begin, end) ignoring channels; resets clear
/// the frame, measurements leave it unchanged.
void propagate_frame(const NoisyCircuit& circuit, PauliFrame& frame, std::size_t begin, std::size_t end);

}  // namespace xtalk
