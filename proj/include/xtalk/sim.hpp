#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "xtalk/circuit.hpp"
#include "xtalk/code.hpp"
#include "xtalk/noise.hpp"

namespace xtalk {

/// |0_L> memory experiment: data resets, `rounds` noisy syndrome rounds (the
/// last one also measures the data), detectors and the logical Z observable.
NoisyCircuit build_memory_circuit(const CodeLayout& layout, const Schedule& schedule, const NoiseParams& params,
                                  int rounds);

/// Shot-major packed detector bits.
struct SampleBatch {
  std::size_t shots = 0;
  std::size_t num_detectors = 0;
  std::size_t words_per_shot = 0;
  std::vector<std::uint64_t> detector_bits;
  std::vector<std::uint8_t> observable_flips;

  bool detector(std::size_t shot, std::size_t det) const {
    return (detector_bits[shot * words_per_shot + det / 64] >> (det % 64)) & 1U;
  }
  /// One row per shot: detector bits as 0/1 characters, then the observable.
  void write_csv(std::ostream& out) const;
  /// Raw little-endian dump: shots, num_detectors, words_per_shot (u64 each),
  /// then detector_bits, then observable_flips.
  void write_packed(std::ostream& out) const;
};

inline constexpr std::size_t kBatchWords = 16;
inline constexpr std::size_t kBatchShots = 64 * kBatchWords;

/// Detector-major result of one batch of up to kBatchShots shots.
struct FrameBatch {
  std::size_t index = 0;
  std::size_t lanes = 0;
  /// detectors[d * kBatchWords + w]
  std::vector<std::uint64_t> detectors;
  std::array<std::uint64_t, kBatchWords> observable{};

  bool detector(std::size_t det, std::size_t lane) const {
    return (detectors[det * kBatchWords + lane / 64] >> (lane % 64)) & 1U;
  }
  bool observable_flip(std::size_t lane) const { return (observable[lane / 64] >> (lane % 64)) & 1U; }
};

/// Bit-parallel Pauli frame sampler. Batch b of a run with seed s always
/// draws the same noise, whichever worker executes it.
class FrameSimulator {
 public:
  explicit FrameSimulator(const NoisyCircuit& circuit);

  void run_batch(std::uint64_t seed, std::size_t batch, std::size_t lanes, FrameBatch& out) const;

  /// Runs ceil(shots / kBatchShots) batches on `workers` threads and calls
  /// `visit` once per batch (concurrently from worker threads).
  void for_each_batch(std::uint64_t seed, std::size_t shots, int workers,
                      const std::function<void(const FrameBatch&)>& visit) const;

  const NoisyCircuit& circuit() const { return circuit_; }

 private:
  struct CompiledChannel {
    double probability = 0.0;
    double log1m_p = 0.0;
    std::vector<double> cumulative;  // conditional CDF over terms
  };
  const NoisyCircuit& circuit_;
  std::vector<CompiledChannel> compiled_;
};

SampleBatch pauli_frame_sample(const NoisyCircuit& circuit, std::size_t shots, std::uint64_t seed,
                               int workers = 1);

struct SingleFault {
  std::uint32_t channel = 0;
  std::uint32_t term = 0;
  double probability = 0.0;
  std::vector<std::uint32_t> detectors;  // sorted
  bool observable = false;
  /// For two-qubit terms acting on both qubits: the symptoms of the two
  /// single-qubit halves propagated separately.
  bool split = false;
  std::array<std::vector<std::uint32_t>, 2> part_detectors;
  std::array<bool, 2> part_observable{};
};

/// One entry per nonzero Pauli term of every channel, in channel order.
std::vector<SingleFault> enumerate_single_faults(const NoisyCircuit& circuit);

/// Number of worker threads from XTALK_WORKERS, else hardware concurrency.
int default_workers();

}  // namespace xtalk
