#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "xtalk/circuit.hpp"
#include "xtalk/code.hpp"

namespace xtalk {

class Config;

/// Durations in units of the two-qubit gate time.
struct Durations {
  double two_qubit = 1.0;
  double single_qubit = 0.1;
  double measurement = 5.0;
};

struct UniformCrosstalk {
  double p_c = 0.0;
};

/// p_c = c (r/a)^-gamma for r >= r_min (r_min in units of a); below r_min the
/// clamp value, defaulting to the value at r_min.
struct PowerLawCrosstalk {
  double c = 0.015;
  double gamma = 5.87;
  double r_min = 4.0;
  std::optional<double> clamp;
};

/// Explicit per-qubit-pair table, keyed by (min id, max id).
struct MatrixCrosstalk {
  std::map<std::pair<QubitId, QubitId>, double> table;
};

using CrosstalkModel = std::variant<UniformCrosstalk, PowerLawCrosstalk, MatrixCrosstalk>;

/// pauli: X on a control endpoint, Z on a target endpoint.
/// depolarizing: two-qubit depolarizing of the same total probability on the
/// endpoint pair (used for the crosstalk-only threshold studies).
enum class CrosstalkKind { pauli, depolarizing };

struct NoiseParams {
  double p_g = 0.0;
  /// Coherence time in two-qubit-gate units; infinity disables idle errors.
  double T = std::numeric_limits<double>::infinity();
  CrosstalkModel crosstalk = UniformCrosstalk{};
  CrosstalkKind crosstalk_kind = CrosstalkKind::pauli;
  Durations durations;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;

  /// Reads keys p (sets p_g, p_i and p_c together), p_g, p_c, T | p_i,
  /// crosstalk.{model,kind,c,gamma,rmin,clamp,table} and durations.*. Keys are
  /// relative to the noise section.
  static NoiseParams from_config(const std::map<std::string, std::string>& section);
};

/// (3/4)(1 - exp(-t/T)).
double idle_error_prob(double t, double T);
/// Inverse of idle_error_prob at unit time; returns infinity for p_i = 0.
double coherence_from_idle(double p_i);

/// Crosstalk between two code qubits using their triangular-lattice distance.
double crosstalk_prob(const CrosstalkModel& model, const CodeLayout& layout, QubitId a, QubitId b);
/// Power-law value at distance r (in units of a).
double crosstalk_prob(const PowerLawCrosstalk& model, double r_over_a);

struct CrosstalkLocation {
  QubitId qubit_a = 0;
  Pauli pauli_a = Pauli::X;
  QubitId qubit_b = 0;
  Pauli pauli_b = Pauli::X;
  double probability = 0.0;
};

/// One location per unordered cross-gate qubit pair: 4 per gate pair.
std::vector<CrosstalkLocation> crosstalk_locations(const CodeLayout& layout, const std::vector<Cnot>& group,
                                                   const CrosstalkModel& model);

/// Summed crosstalk probability over one round divided by the CNOT count.
double effective_crosstalk_per_gate(const CodeLayout& layout, const Schedule& schedule,
                                    const CrosstalkModel& model);

/// Channel factories.
PauliChannel depolarize1(QubitId q, double p, ChannelKind kind);
PauliChannel depolarize2(QubitId a, QubitId b, double p, ChannelKind kind);

/// Appends one noisy syndrome-extraction round: ancilla resets, basis change,
/// scheduled CNOT groups, basis change, ancilla measurement. When
/// `measure_data` is set the data qubits are measured in the same step.
/// Returns the record index of the first ancilla measurement.
std::uint32_t append_noisy_round(NoisyCircuit& circuit, const CodeLayout& layout, const Schedule& schedule,
                                 const NoiseParams& params, int round, bool measure_data);

/// Single noisy round on freshly reset qubits, without detectors.
NoisyCircuit attach_noise(const CodeLayout& layout, const Schedule& schedule, const NoiseParams& params);

}  // namespace xtalk
