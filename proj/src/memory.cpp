#include <stdexcept>

#include "xtalk/sim.hpp"

namespace xtalk {

NoisyCircuit build_memory_circuit(const CodeLayout& layout, const Schedule& schedule, const NoiseParams& params,
                                  int rounds) {
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  params.validate();
  NoisyCircuit circuit;
  circuit.num_qubits = static_cast<std::uint32_t>(layout.num_qubits());
  circuit.rounds = rounds;
  for (QubitId q = 0; q < layout.num_data(); ++q) circuit.reset(q);

  const std::size_t n_anc = layout.ancillas.size();
  std::vector<std::uint32_t> first(static_cast<std::size_t>(rounds));
  for (int r = 0; r < rounds; ++r) {
    first[r] = append_noisy_round(circuit, layout, schedule, params, r, r == rounds - 1);
    for (std::size_t a = 0; a < n_anc; ++a) {
      const std::uint32_t now = first[r] + static_cast<std::uint32_t>(a);
      const bool z_type = layout.ancillas[a].basis == Basis::Z;
      if (r == 0) {
        // Z stabilizers start deterministic on |0...0>; X outcomes are random.
        if (z_type) {
          circuit.detectors.push_back({now});
          circuit.detector_basis.push_back(Basis::Z);
        }
      } else {
        circuit.detectors.push_back({first[r - 1] + static_cast<std::uint32_t>(a), now});
        circuit.detector_basis.push_back(layout.ancillas[a].basis);
      }
    }
  }

  const std::uint32_t data_first = first.back() + static_cast<std::uint32_t>(n_anc);
  for (std::size_t a = 0; a < n_anc; ++a) {
    if (layout.ancillas[a].basis != Basis::Z) continue;
    std::vector<std::uint32_t> det;
    for (QubitId q : layout.plaquettes[a]) det.push_back(data_first + q);
    det.push_back(first.back() + static_cast<std::uint32_t>(a));
    circuit.detectors.push_back(std::move(det));
    circuit.detector_basis.push_back(Basis::Z);
  }
  for (QubitId q : layout.logical_z_support) circuit.observable.push_back(data_first + q);
  return circuit;
}

}  // namespace xtalk
