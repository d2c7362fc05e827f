#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "matching_oracle.hpp"
#include "xtalk/decode.hpp"

using namespace xtalk;

namespace {

NoiseParams uniform_noise(double p) {
  NoiseParams params;
  params.p_g = p;
  params.T = coherence_from_idle(p);
  params.crosstalk = UniformCrosstalk{p};
  return params;
}

}  // namespace

TEST(Dem, MergeRule) {
  EXPECT_EQ(merge_probability(0.01, 0.0), 0.01);
  EXPECT_EQ(merge_probability(0.0, 0.02), 0.02);
  EXPECT_DOUBLE_EQ(merge_probability(0.1, 0.2), 0.1 * 0.8 + 0.2 * 0.9);
  EXPECT_DOUBLE_EQ(merge_probability(0.5, 0.3), 0.5);
}

TEST(Dem, SingleCnotDepolarizing) {
  NoisyCircuit c;
  c.num_qubits = 2;
  c.reset(0);
  c.reset(1);
  c.cnot(0, 1);
  c.add_channel(depolarize2(0, 1, 0.015, ChannelKind::gate));
  c.detectors.push_back({c.measure(0)});
  c.detectors.push_back({c.measure(1)});
  const auto faults = enumerate_single_faults(c);
  ASSERT_EQ(faults.size(), 15U);
  for (const auto& f : faults) EXPECT_DOUBLE_EQ(f.probability, 0.001);
  const auto dem = build_dem(c);
  EXPECT_TRUE(dem.merged);
  // Symptoms {0}, {1}, {0,1}, each shared by 4 of the 15 terms.
  ASSERT_EQ(dem.mechanisms.size(), 3U);
  double four = 0.0;
  for (int i = 0; i < 4; ++i) four = merge_probability(four, 0.001);
  for (const auto& m : dem.mechanisms) EXPECT_NEAR(m.probability, four, 1e-18);
  std::set<std::pair<std::vector<std::uint32_t>, bool>> keys;
  for (const auto& m : dem.mechanisms) EXPECT_TRUE(keys.insert({m.detectors, m.observable}).second);
}

TEST(Dem, DumpFormat) {
  DetectorErrorModel dem;
  dem.num_detectors = 3;
  dem.mechanisms.push_back({0.125, {0, 2}, true, {}});
  EXPECT_EQ(dem.dump(), "0.125 D0 D2 L0\n");
}

TEST(Graph, GraphlikeMechanismsMapOneToOne) {
  DetectorErrorModel dem;
  dem.num_detectors = 4;
  dem.mechanisms.push_back({0.01, {0}, false, {}});
  dem.mechanisms.push_back({0.02, {0, 1}, true, {}});
  dem.mechanisms.push_back({0.03, {2, 3}, false, {}});
  dem.mechanisms.push_back({0.04, {3}, false, {}});
  const auto g = decompose_to_graphlike(dem);
  ASSERT_EQ(g.edges.size(), 4U);
  for (const auto& e : g.edges) {
    EXPECT_NEAR(e.weight, std::log((1 - e.probability) / e.probability), 1e-12);
    EXPECT_GT(e.weight, 0.0);
  }
  EXPECT_TRUE(decompose_to_graphlike(DetectorErrorModel{}).edges.empty());
}

TEST(Graph, HyperedgeSplitsIntoExistingEdges) {
  DetectorErrorModel dem;
  dem.num_detectors = 5;
  dem.mechanisms.push_back({0.01, {0, 1}, true, {}});
  dem.mechanisms.push_back({0.01, {2, 3}, false, {}});
  dem.mechanisms.push_back({0.02, {1, 2}, false, {}});
  dem.mechanisms.push_back({0.001, {0, 1, 2, 3}, true, {}});
  const auto g = decompose_to_graphlike(dem);
  ASSERT_EQ(g.edges.size(), 3U);
  int touched = 0;
  for (const auto& e : g.edges) {
    const bool from_hyper = std::find(e.sources.begin(), e.sources.end(), 3U) != e.sources.end();
    touched += from_hyper;
    if (from_hyper) EXPECT_NEAR(e.probability, merge_probability(0.01, 0.001), 1e-15);
  }
  EXPECT_EQ(touched, 2);
}

TEST(Graph, UndecomposableMechanismThrows) {
  DetectorErrorModel dem;
  dem.num_detectors = 3;
  dem.mechanisms.push_back({0.01, {0, 1, 2}, false, {}});
  EXPECT_THROW(decompose_to_graphlike(dem), UndecomposableMechanism);
  // A split hint rescues it.
  dem.mechanisms[0].split_hint = {{{0, 1}, false}, {{2}, false}};
  EXPECT_NO_THROW(decompose_to_graphlike(dem));
}

TEST(Graph, EdgeWeightDomain) {
  EXPECT_THROW(edge_weight(0.5), std::invalid_argument);
  EXPECT_THROW(edge_weight(0.0), std::invalid_argument);
  EXPECT_NEAR(edge_weight(0.1), std::log(9.0), 1e-15);
}

TEST(Graph, CrosstalkHyperedgesDecomposeIntoTwoEdges) {
  const auto layout = build_rotated_surface_code(5);
  NoiseParams params;
  params.crosstalk = UniformCrosstalk{1e-5};
  params.p_g = 1e-3;
  params.T = coherence_from_idle(1e-3);
  const auto c = build_memory_circuit(layout, full_schedule(layout), params, 3);
  const auto dem = build_dem(c);
  const auto g = decompose_to_graphlike(dem);
  std::vector<int> parts(dem.mechanisms.size(), 0);
  for (const auto& e : g.edges) {
    for (auto s : e.sources) ++parts[s];
  }
  int four = 0;
  for (std::size_t i = 0; i < dem.mechanisms.size(); ++i) {
    const auto& dets = dem.mechanisms[i].detectors;
    if (dets.size() != 4) continue;
    const auto z = std::count_if(dets.begin(), dets.end(), [&](auto d) { return c.detector_basis[d] == Basis::Z; });
    if (z != 2) continue;
    ++four;
    // One X-type pair and one Z-type pair: two edges (a pruned parallel
    // observable variant can hide one of them).
    EXPECT_GE(parts[i], 1);
    EXPECT_LE(parts[i], 2);
  }
  EXPECT_GT(four, 0);
  // Every detector is reachable: decoding any single detector succeeds.
  const MwpmDecoder dec(g);
  for (std::uint32_t det = 0; det < c.num_detectors(); ++det) EXPECT_NO_THROW(dec.decode({det}));
}

TEST(Mwpm, SmallExamples) {
  MatchingGraph g;
  g.num_detectors = 2;
  g.edges.push_back({0, 1, 0.1, edge_weight(0.1), true, {}});
  EXPECT_FALSE(mwpm_decode(g, {}));
  EXPECT_TRUE(mwpm_decode(g, {0, 1}));
  EXPECT_THROW(mwpm_decode(g, {0}), DisconnectedSyndrome);

  g.edges.push_back({0, 2, 0.01, edge_weight(0.01), false, {}});
  g.edges.push_back({1, 2, 0.01, edge_weight(0.01), false, {}});
  const MwpmDecoder dec(g);
  EXPECT_FALSE(dec.predict({0}));
  EXPECT_TRUE(dec.predict({0, 1}));
  EXPECT_EQ(dec.decode({0, 1}).weight, std::llround(edge_weight(0.1) * MwpmDecoder::kWeightScale));
}

TEST(Mwpm, RandomInstancesMatchBruteForce) {
  std::mt19937_64 rng(13);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::uint32_t n = 6 + static_cast<std::uint32_t>(rng() % 14);
    const auto g = oracle::random_matching_graph(rng, n);
    const MwpmDecoder dec(g);
    for (int s = 0; s < 4; ++s) {
      std::vector<std::uint32_t> all(n);
      std::iota(all.begin(), all.end(), 0U);
      std::shuffle(all.begin(), all.end(), rng);
      const std::size_t k = 1 + rng() % std::min<std::size_t>(10, n);
      std::vector<std::uint32_t> syndrome(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(syndrome.begin(), syndrome.end());
      EXPECT_EQ(dec.decode(syndrome).weight, oracle::brute_force_weight(g, syndrome)) << "trial " << trial;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 1200);
}

TEST(Estimates, WilsonInterval) {
  const double z = 1.959963984540054;
  const auto zero = wilson_interval(0, 10);
  EXPECT_EQ(zero.low, 0.0);
  EXPECT_NEAR(zero.high, z * z / (10 + z * z), 1e-12);
  const auto mid = wilson_interval(50, 100);
  EXPECT_NEAR(mid.low + mid.high, 1.0, 1e-12);
  EXPECT_NEAR(mid.high - 0.5, z * std::sqrt(0.25 / 100 + z * z / 40000) / (1 + z * z / 100), 1e-12);
}

TEST(Estimates, PerRoundAndCoherence) {
  EXPECT_DOUBLE_EQ(per_round_rate(0.1, 1), 0.1);
  EXPECT_NEAR(per_round_rate(0.1, 5), 0.5 * (1 - std::pow(0.8, 0.2)), 1e-15);
  EXPECT_NEAR(per_round_rate(1e-12, 5), 2e-13, 1e-24);
  EXPECT_EQ(per_round_rate(0.0, 3), 0.0);
  EXPECT_TRUE(std::isinf(logical_coherence_time(0.0, 9.0)));
  EXPECT_NEAR(logical_coherence_time(0.5 * (1 - std::exp(-1.0)), 1.0), 1.0, 1e-12);
  EXPECT_NEAR(logical_coherence_time(1e-3, 9.0), -9.0 / std::log(0.998), 1e-9);
  EXPECT_NEAR(logical_coherence_time(1e-3, 9.0), 4495.5, 0.1);
  EXPECT_THROW(logical_coherence_time(0.5, 9.0), std::invalid_argument);
}

TEST(Estimates, ZeroNoiseAndDeterminism) {
  const auto layout = build_rotated_surface_code(3);
  const auto quiet = build_memory_circuit(layout, full_schedule(layout), NoiseParams{}, 3);
  const auto zero = estimate_logical_error_rate(quiet, 4096, 1);
  EXPECT_EQ(zero.failures, 0U);
  EXPECT_EQ(zero.p_l, 0.0);

  const auto noisy = build_memory_circuit(layout, full_schedule(layout), uniform_noise(2e-3), 3);
  const auto a = estimate_logical_error_rate(noisy, 20000, 9, 1);
  const auto b = estimate_logical_error_rate(noisy, 20000, 9, 4);
  EXPECT_EQ(a.failures, b.failures);
  EXPECT_GT(a.failures, 0U);
  EXPECT_LE(a.ci_low, a.p_l);
  EXPECT_GE(a.ci_high, a.p_l);
}

TEST(Estimates, MonotoneInNoise) {
  const auto layout = build_rotated_surface_code(3);
  double prev = -1.0;
  for (double p : {5e-4, 2e-3, 8e-3}) {
    const auto c = build_memory_circuit(layout, full_schedule(layout), uniform_noise(p), 3);
    const auto est = estimate_logical_error_rate(c, 20000, 4);
    EXPECT_GT(est.p_l, prev);
    prev = est.p_l;
  }
}

TEST(FaultDistance, D3HasUncorrectableSingleCrosstalk) {
  const auto layout = build_rotated_surface_code(3);
  const auto c = build_memory_circuit(layout, full_schedule(layout), uniform_noise(1e-4), 3);
  const auto faults = enumerate_single_faults(c);
  const MwpmDecoder dec(decompose_to_graphlike(build_dem(c)));
  int crosstalk_fail = 0;
  for (const auto& f : faults) {
    if (dec.predict(f.detectors) != f.observable) crosstalk_fail += c.channels[f.channel].kind == ChannelKind::crosstalk;
  }
  EXPECT_GT(crosstalk_fail, 0);
}

TEST(FaultDistance, D5CorrectsEverySingleFault) {
  const auto layout = build_rotated_surface_code(5);
  const auto c = build_memory_circuit(layout, full_schedule(layout), uniform_noise(1e-4), 5);
  const auto faults = enumerate_single_faults(c);
  const MwpmDecoder dec(decompose_to_graphlike(build_dem(c)));
  std::size_t failures = 0;
  for (const auto& f : faults) failures += dec.predict(f.detectors) != f.observable;
  EXPECT_EQ(failures, 0U);
  EXPECT_GT(faults.size(), 15200U);
}
