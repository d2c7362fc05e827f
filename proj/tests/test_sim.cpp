#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <set>
#include <sstream>

#include "xtalk/decode.hpp"
#include "xtalk/sim.hpp"

using namespace xtalk;
using C = std::complex<double>;
using Mat = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;

namespace {

Mat pauli_matrix(Pauli p) {
  Mat m(2, 2);
  switch (p) {
    case Pauli::I: m << 1, 0, 0, 1; break;
    case Pauli::X: m << 0, 1, 1, 0; break;
    case Pauli::Z: m << 1, 0, 0, -1; break;
    case Pauli::Y: m << 0, C(0, -1), C(0, 1), 0; break;
  }
  return m;
}

// Qubit 0 is the most significant tensor factor.
Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

// Identifies U P U^dagger as a two-qubit Pauli up to phase.
std::pair<Pauli, Pauli> conjugate(const Mat& u, Pauli p0, Pauli p1) {
  const Mat img = u * kron(pauli_matrix(p0), pauli_matrix(p1)) * u.adjoint();
  for (unsigned a = 0; a < 4; ++a) {
    for (unsigned b = 0; b < 4; ++b) {
      const Mat cand = kron(pauli_matrix(static_cast<Pauli>(a)), pauli_matrix(static_cast<Pauli>(b)));
      const C overlap = (cand.adjoint() * img).trace() / 4.0;
      if (std::abs(std::abs(overlap) - 1.0) < 1e-12) return {static_cast<Pauli>(a), static_cast<Pauli>(b)};
    }
  }
  ADD_FAILURE() << "image is not a Pauli";
  return {Pauli::I, Pauli::I};
}

NoisyCircuit noiseless_memory(int d, int rounds) {
  const auto layout = build_rotated_surface_code(d);
  return build_memory_circuit(layout, full_schedule(layout), NoiseParams{}, rounds);
}

}  // namespace

TEST(Frame, CnotMatchesUnitaryConjugation) {
  Mat cnot = Mat::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1;
  NoisyCircuit c;
  c.num_qubits = 2;
  c.cnot(0, 1);
  for (unsigned a = 0; a < 4; ++a) {
    for (unsigned b = 0; b < 4; ++b) {
      PauliFrame f(2);
      f.apply(0, static_cast<Pauli>(a));
      f.apply(1, static_cast<Pauli>(b));
      propagate_frame(c, f, 0, c.ops.size());
      const auto want = conjugate(cnot, static_cast<Pauli>(a), static_cast<Pauli>(b));
      EXPECT_EQ(f.at(0), want.first) << a << b;
      EXPECT_EQ(f.at(1), want.second) << a << b;
    }
  }
}

TEST(Frame, HadamardMatchesUnitaryConjugation) {
  Mat h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const Mat u = kron(h, pauli_matrix(Pauli::I));
  NoisyCircuit c;
  c.num_qubits = 2;
  c.hadamard(0);
  for (unsigned a = 0; a < 4; ++a) {
    PauliFrame f(2);
    f.apply(0, static_cast<Pauli>(a));
    propagate_frame(c, f, 0, c.ops.size());
    EXPECT_EQ(f.at(0), conjugate(u, static_cast<Pauli>(a), Pauli::I).first);
  }
}

TEST(Memory, DetectorCountsAndZeroNoise) {
  for (int d : {3, 5}) {
    const int rounds = d;
    const auto c = noiseless_memory(d, rounds);
    const int n_anc = d * d - 1;
    // Round 0: Z checks only; later rounds all checks; final: Z checks.
    EXPECT_EQ(c.num_detectors(), static_cast<std::size_t>(n_anc / 2 + (rounds - 1) * n_anc + n_anc / 2));
    EXPECT_EQ(c.detector_basis.size(), c.num_detectors());
    EXPECT_EQ(c.observable.size(), static_cast<std::size_t>(d));
    const auto batch = pauli_frame_sample(c, 10000, 7);
    for (auto w : batch.detector_bits) ASSERT_EQ(w, 0U);
    for (auto o : batch.observable_flips) ASSERT_EQ(o, 0U);
  }
}

TEST(Memory, DataErrorBetweenRoundsFlipsTwoDetectors) {
  const int d = 5;
  const auto layout = build_rotated_surface_code(d);
  for (Pauli p : {Pauli::X, Pauli::Z}) {
    auto c = build_memory_circuit(layout, full_schedule(layout), NoiseParams{}, 3);
    // Insert a certain error right after round 0 (its last tick).
    std::size_t ticks = 0;
    std::size_t pos = 0;
    const std::size_t ticks_per_round = 1 + 4 + 1 + 1;
    for (; pos < c.ops.size(); ++pos) {
      if (c.ops[pos].kind == OpKind::tick && ++ticks == ticks_per_round) break;
    }
    const QubitId bulk = *layout.qubit_at({5, 5});
    PauliChannel ch;
    ch.q0 = bulk;
    ch.terms.push_back({p, Pauli::I, 1.0});
    c.channels.push_back(ch);
    c.ops.insert(c.ops.begin() + static_cast<std::ptrdiff_t>(pos + 1),
                 Op{OpKind::channel, bulk, kNoQubit, static_cast<std::uint32_t>(c.channels.size() - 1)});
    const auto batch = pauli_frame_sample(c, 200, 3);
    for (std::size_t s = 0; s < batch.shots; ++s) {
      int fired = 0;
      for (std::size_t det = 0; det < batch.num_detectors; ++det) {
        if (batch.detector(s, det)) {
          ++fired;
          EXPECT_EQ(c.detector_basis[det], p == Pauli::X ? Basis::Z : Basis::X);
        }
      }
      EXPECT_EQ(fired, 2);
    }
    const auto faults = enumerate_single_faults(c);
    ASSERT_EQ(faults.size(), 1U);
    EXPECT_EQ(faults[0].detectors.size(), 2U);
  }
}

TEST(Sampler, CertainChannelFlipsRecord) {
  NoisyCircuit c;
  c.num_qubits = 1;
  c.reset(0);
  PauliChannel ch;
  ch.q0 = 0;
  ch.terms.push_back({Pauli::X, Pauli::I, 1.0});
  c.add_channel(ch);
  const auto r = c.measure(0);
  c.detectors.push_back({r});
  c.observable.push_back(r);
  const auto batch = pauli_frame_sample(c, 3000, 11);
  for (std::size_t s = 0; s < batch.shots; ++s) {
    EXPECT_TRUE(batch.detector(s, 0));
    EXPECT_EQ(batch.observable_flips[s], 1U);
  }
}

TEST(Sampler, IsolatedChannelFrequencyWithinWilson99) {
  for (double p : {0.013, 0.2, 3e-4}) {
    NoisyCircuit c;
    c.num_qubits = 2;
    c.reset(0);
    c.reset(1);
    // Two terms with distinguishable symptoms.
    PauliChannel ch;
    ch.q0 = 0;
    ch.q1 = 1;
    ch.terms.push_back({Pauli::X, Pauli::I, 0.25 * p});
    ch.terms.push_back({Pauli::X, Pauli::X, 0.75 * p});
    c.add_channel(ch);
    c.detectors.push_back({c.measure(0)});
    c.detectors.push_back({c.measure(1)});
    const std::size_t shots = 100000;
    const auto batch = pauli_frame_sample(c, shots, 5);
    std::uint64_t first = 0, both = 0;
    for (std::size_t s = 0; s < shots; ++s) {
      first += batch.detector(s, 0);
      both += batch.detector(s, 0) && batch.detector(s, 1);
      EXPECT_TRUE(!batch.detector(s, 1) || batch.detector(s, 0));
    }
    const auto ci = wilson_interval(first, shots, 2.5758293035489);
    EXPECT_LE(ci.low, p);
    EXPECT_GE(ci.high, p);
    const auto ci_both = wilson_interval(both, shots, 2.5758293035489);
    EXPECT_LE(ci_both.low, 0.75 * p);
    EXPECT_GE(ci_both.high, 0.75 * p);
  }
}

TEST(Sampler, DeterministicAcrossWorkers) {
  const auto layout = build_rotated_surface_code(3);
  NoiseParams params;
  params.p_g = 2e-3;
  params.T = coherence_from_idle(2e-3);
  params.crosstalk = UniformCrosstalk{2e-3};
  const auto c = build_memory_circuit(layout, full_schedule(layout), params, 3);
  const auto a = pauli_frame_sample(c, 5000, 42, 1);
  const auto b = pauli_frame_sample(c, 5000, 42, 3);
  const auto other = pauli_frame_sample(c, 5000, 43, 1);
  EXPECT_EQ(a.detector_bits, b.detector_bits);
  EXPECT_EQ(a.observable_flips, b.observable_flips);
  EXPECT_NE(a.detector_bits, other.detector_bits);
  std::ostringstream pa, pb;
  a.write_packed(pa);
  b.write_packed(pb);
  EXPECT_EQ(pa.str(), pb.str());
}

TEST(Sampler, DetectorRateStableAcrossSeeds) {
  const auto layout = build_rotated_surface_code(3);
  NoiseParams params;
  params.p_g = 1e-3;
  params.T = coherence_from_idle(1e-3);
  params.crosstalk = UniformCrosstalk{1e-3};
  const auto c = build_memory_circuit(layout, full_schedule(layout), params, 3);
  const std::size_t shots = 20000;
  std::vector<double> rates;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto batch = pauli_frame_sample(c, shots, seed);
    std::uint64_t fired = 0;
    for (std::size_t s = 0; s < shots; ++s) {
      for (std::size_t det = 0; det < batch.num_detectors; ++det) fired += batch.detector(s, det);
    }
    rates.push_back(static_cast<double>(fired) / static_cast<double>(shots * batch.num_detectors));
  }
  const double n = static_cast<double>(shots * c.num_detectors());
  for (double r : rates) {
    EXPECT_GT(r, 0.0);
    const double sigma = std::sqrt(rates[0] * (1 - rates[0]) / n);
    // Detectors within a shot are correlated; allow for it generously.
    EXPECT_NEAR(r, rates[0], 3.0 * 4.0 * sigma);
  }
}

TEST(Sampler, CsvExport) {
  NoisyCircuit c;
  c.num_qubits = 1;
  c.reset(0);
  PauliChannel ch;
  ch.q0 = 0;
  ch.terms.push_back({Pauli::X, Pauli::I, 1.0});
  c.add_channel(ch);
  const auto r = c.measure(0);
  c.detectors.push_back({r});
  c.detectors.push_back({r, r});
  const auto batch = pauli_frame_sample(c, 2, 1);
  std::ostringstream out;
  batch.write_csv(out);
  EXPECT_EQ(out.str(), "1,0,0\n1,0,0\n");
}

TEST(Faults, ZeroNoiseHasNoFaults) { EXPECT_TRUE(enumerate_single_faults(noiseless_memory(3, 3)).empty()); }

TEST(Faults, EveryCrosstalkLocationEnumeratedOnce) {
  const int d = 5, rounds = 5;
  const auto layout = build_rotated_surface_code(d);
  NoiseParams params;
  params.crosstalk = UniformCrosstalk{1e-5};
  const auto c = build_memory_circuit(layout, full_schedule(layout), params, rounds);
  const auto faults = enumerate_single_faults(c);
  EXPECT_EQ(faults.size(), static_cast<std::size_t>(4 * 2 * 20 * 19 * rounds));
  std::set<std::uint32_t> channels;
  for (const auto& f : faults) {
    EXPECT_EQ(c.channels[f.channel].kind, ChannelKind::crosstalk);
    EXPECT_TRUE(channels.insert(f.channel).second);
    EXPECT_TRUE(f.split);
  }
}

TEST(Faults, SecondLayerCrosstalkGivesWeightFourDataError) {
  const auto layout = build_rotated_surface_code(5);
  NoiseParams params;
  params.crosstalk = UniformCrosstalk{1e-5};
  const auto c = build_memory_circuit(layout, full_schedule(layout), params, 2);
  int weight4 = 0;
  for (std::size_t i = 0; i < c.ops.size(); ++i) {
    if (c.ops[i].kind != OpKind::channel) continue;
    const auto& ch = c.channels[c.ops[i].index];
    if (ch.round != 0 || ch.step != 2) continue;  // step 0 is the basis change
    if (layout.is_data(ch.q0) || layout.is_data(ch.q1)) continue;
    const auto& t = ch.terms[0];
    if (t.first != Pauli::X || t.second != Pauli::Z) continue;
    if (layout.plaquettes[ch.q0 - layout.num_data()].size() != 4) continue;
    if (layout.plaquettes[ch.q1 - layout.num_data()].size() != 4) continue;
    PauliFrame f(c.num_qubits);
    f.apply(ch.q0, t.first);
    f.apply(ch.q1, t.second);
    // Propagate to the end of the round (the measurement op of the first ancilla).
    std::size_t end = i + 1;
    while (c.ops[end].kind != OpKind::measure) ++end;
    propagate_frame(c, f, i + 1, end);
    std::size_t data_weight = 0;
    for (QubitId q = 0; q < layout.num_data(); ++q) data_weight += f.at(q) != Pauli::I;
    // Weight 3 only when the row and column images share a qubit.
    EXPECT_TRUE(data_weight == 4 || data_weight == 3);
    weight4 += data_weight == 4;
  }
  EXPECT_GT(weight4, 0);
}
