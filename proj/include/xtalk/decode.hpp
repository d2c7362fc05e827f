#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "xtalk/circuit.hpp"
#include "xtalk/sim.hpp"

namespace xtalk {

class UndecomposableMechanism : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DisconnectedSyndrome : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A graphlike piece (one or two detectors) with its observable bit.
struct SymptomPart {
  std::vector<std::uint32_t> detectors;
  bool observable = false;
};

struct DemMechanism {
  double probability = 0.0;
  std::vector<std::uint32_t> detectors;  // sorted
  bool observable = false;
  /// Per-qubit halves of the first contributing two-qubit fault, if any.
  std::vector<SymptomPart> split_hint;
};

struct DetectorErrorModel {
  std::size_t num_detectors = 0;
  /// Copied from the circuit; decomposition never joins detectors of
  /// different type in one edge.
  std::vector<Basis> detector_basis;
  std::vector<DemMechanism> mechanisms;
  bool merged = false;

  /// One mechanism per line: `probability D<ids...> [L0]`.
  std::string dump() const;
};

/// p1 (1 - p2) + p2 (1 - p1).
double merge_probability(double p1, double p2);

DetectorErrorModel dem_from_faults(std::size_t num_detectors, const std::vector<SingleFault>& faults,
                                   std::vector<Basis> detector_basis = {});
DetectorErrorModel build_dem(const NoisyCircuit& circuit);

struct MatchingEdge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;  // num_detectors denotes the boundary
  double probability = 0.0;
  double weight = 0.0;
  bool observable = false;
  std::vector<std::uint32_t> sources;  // mechanism indices
};

struct MatchingGraph {
  std::size_t num_detectors = 0;
  std::vector<MatchingEdge> edges;

  std::uint32_t boundary() const { return static_cast<std::uint32_t>(num_detectors); }
};

/// ln((1 - p) / p); rejects p outside (0, 1/2).
double edge_weight(double p);

/// Mechanisms touching both detector types are first split by type, with the
/// observable bit carried by the Z-type part (only X errors flip a logical-Z
/// readout). Parts with more than two detectors are split into existing
/// graphlike symptoms of minimum total weight.
MatchingGraph decompose_to_graphlike(const DetectorErrorModel& dem);

struct DecodeResult {
  bool observable = false;
  /// Total matched weight in decoder units (edge_weight * kWeightScale, rounded).
  std::int64_t weight = 0;
};

/// Exact minimum-weight perfect matching decoder. Shortest paths between all
/// detectors and to the boundary are precomputed; per syndrome the defects are
/// split into independent clusters and each is matched with a blossom solver.
class MwpmDecoder {
 public:
  static constexpr double kWeightScale = 1.0e4;
  static constexpr std::int64_t kInfinity = std::numeric_limits<std::int64_t>::max() / 4;

  explicit MwpmDecoder(const MatchingGraph& graph);

  DecodeResult decode(const std::vector<std::uint32_t>& syndrome) const;
  bool predict(const std::vector<std::uint32_t>& syndrome) const { return decode(syndrome).observable; }

  std::size_t num_detectors() const { return n_; }
  std::int64_t distance(std::uint32_t a, std::uint32_t b) const { return dist_[a * (n_ + 1) + b]; }
  bool path_parity(std::uint32_t a, std::uint32_t b) const { return parity_[a * (n_ + 1) + b] != 0; }

 private:
  std::size_t n_ = 0;
  std::vector<std::int64_t> dist_;
  std::vector<std::uint8_t> parity_;
};

/// Convenience wrapper building a decoder for a single call.
bool mwpm_decode(const MatchingGraph& graph, const std::vector<std::uint32_t>& syndrome);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for k successes in n trials.
Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054);

/// (1/2)(1 - (1 - 2P)^(1/rounds)).
double per_round_rate(double p_total, int rounds);

struct LogicalErrorEstimate {
  std::uint64_t shots = 0;
  std::uint64_t failures = 0;
  double p_total = 0.0;
  double p_l = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

LogicalErrorEstimate estimate_logical_error_rate(const NoisyCircuit& circuit, std::uint64_t shots,
                                                 std::uint64_t seed, int workers = 1);
/// Same estimate with a prebuilt decoder.
LogicalErrorEstimate estimate_logical_error_rate(const NoisyCircuit& circuit, const MwpmDecoder& decoder,
                                                 std::uint64_t shots, std::uint64_t seed, int workers = 1);

/// -t_cycle / ln(1 - 2 p_L); infinity at p_L = 0.
double logical_coherence_time(double p_l, double t_cycle);

}  // namespace xtalk
