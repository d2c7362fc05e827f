#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "xtalk/config.hpp"
#include "xtalk/noise.hpp"

using namespace xtalk;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t count_kind(const NoisyCircuit& c, ChannelKind kind) {
  std::size_t n = 0;
  for (const auto& ch : c.channels) n += ch.kind == kind;
  return n;
}
}  // namespace

TEST(Idle, ProbabilityValues) {
  EXPECT_EQ(idle_error_prob(0.0, 10.0), 0.0);
  EXPECT_EQ(idle_error_prob(5.0, kInf), 0.0);
  EXPECT_NEAR(idle_error_prob(1.0, 1.0), 0.75 * (1.0 - std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(idle_error_prob(1.0, 1.0), 0.474091, 1e-6);
  double prev = 0.0;
  for (double t = 0.5; t < 50; t *= 1.7) {
    const double p = idle_error_prob(t, 3.0);
    EXPECT_GT(p, prev);
    EXPECT_LT(p, 0.75);
    prev = p;
  }
  EXPECT_NEAR(idle_error_prob(1e4, 1.0), 0.75, 1e-15);
  EXPECT_THROW(idle_error_prob(-1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(idle_error_prob(1.0, 0.0), std::invalid_argument);
}

TEST(Idle, CoherenceInverse) {
  EXPECT_TRUE(std::isinf(coherence_from_idle(0.0)));
  EXPECT_NEAR(coherence_from_idle(0.75 * (1.0 - std::exp(-1.0))), 1.0, 1e-12);
  // -1 / ln(1 - 1e-3)
  EXPECT_NEAR(coherence_from_idle(7.5e-4), -1.0 / std::log(1.0 - 1.0e-3), 1e-9);
  EXPECT_NEAR(coherence_from_idle(7.5e-4), 999.5, 0.01);
  for (double p : {1e-6, 1e-3, 0.1, 0.5}) EXPECT_NEAR(idle_error_prob(1.0, coherence_from_idle(p)), p, 1e-14);
  EXPECT_THROW(coherence_from_idle(0.75), std::invalid_argument);
  EXPECT_THROW(coherence_from_idle(-0.1), std::invalid_argument);
}

TEST(Crosstalk, PowerLawValues) {
  const PowerLawCrosstalk model;  // 0.015 (r/a)^-5.87 above 4a
  EXPECT_NEAR(crosstalk_prob(model, 4.0), 0.015 * std::pow(4.0, -5.87), 1e-20);
  EXPECT_NEAR(crosstalk_prob(model, 4.0), 4.4e-6, 0.05e-6);
  EXPECT_NEAR(crosstalk_prob(model, 8.0), 7.5e-8, 0.1e-8);
  EXPECT_EQ(crosstalk_prob(model, 1.0), crosstalk_prob(model, 4.0));
  PowerLawCrosstalk clamped = model;
  clamped.clamp = 1e-3;
  EXPECT_EQ(crosstalk_prob(clamped, 2.0), 1e-3);
  EXPECT_EQ(crosstalk_prob(clamped, 5.0), crosstalk_prob(model, 5.0));
}

TEST(Crosstalk, ModelsOnLayout) {
  const auto layout = build_rotated_surface_code(3);
  EXPECT_EQ(crosstalk_prob(UniformCrosstalk{1e-5}, layout, 0, 12), 1e-5);
  MatrixCrosstalk m;
  m.table[{0, 12}] = 3e-4;
  EXPECT_EQ(crosstalk_prob(m, layout, 12, 0), 3e-4);
  EXPECT_THROW(crosstalk_prob(m, layout, 1, 12), std::out_of_range);
}

TEST(Crosstalk, LocationCountAndPaulis) {
  const auto layout = build_rotated_surface_code(5);
  const auto sched = full_schedule(layout);
  for (const auto& group : sched.groups) {
    const auto k = group.size();
    const auto locs = crosstalk_locations(layout, group, UniformCrosstalk{1e-5});
    EXPECT_EQ(locs.size(), 2 * k * (k - 1));
    for (const auto& loc : locs) {
      // Control endpoints carry X, targets Z.
      for (const auto& [q, p] : {std::pair{loc.qubit_a, loc.pauli_a}, std::pair{loc.qubit_b, loc.pauli_b}}) {
        bool is_control = false;
        for (const auto& g : group) is_control |= g.control == q;
        EXPECT_EQ(p, is_control ? Pauli::X : Pauli::Z);
      }
    }
  }
  EXPECT_EQ(crosstalk_locations(layout, sched.groups[0], UniformCrosstalk{1e-5}).size(), 760U);
}

TEST(Crosstalk, EffectivePerGate) {
  const auto d3 = build_rotated_surface_code(3);
  EXPECT_NEAR(effective_crosstalk_per_gate(d3, full_schedule(d3), UniformCrosstalk{1e-5}), 10e-5, 1e-18);
  EXPECT_EQ(effective_crosstalk_per_gate(d3, schedule_gates(d3, 1), UniformCrosstalk{1e-5}), 0.0);
  const auto d5 = build_rotated_surface_code(5);
  // Full groups of k give 2(k-1) p_c per gate.
  EXPECT_NEAR(effective_crosstalk_per_gate(d5, schedule_gates(d5, 5), UniformCrosstalk{1e-5}), 8e-5, 1e-16);
}

TEST(Channels, DepolarizingComponents) {
  const auto one = depolarize1(3, 0.03, ChannelKind::idle);
  ASSERT_EQ(one.terms.size(), 3U);
  for (const auto& t : one.terms) EXPECT_DOUBLE_EQ(t.probability, 0.01);
  const auto two = depolarize2(1, 2, 0.015, ChannelKind::gate);
  ASSERT_EQ(two.terms.size(), 15U);
  std::set<std::pair<int, int>> seen;
  for (const auto& t : two.terms) {
    EXPECT_DOUBLE_EQ(t.probability, 0.001);
    EXPECT_FALSE(t.first == Pauli::I && t.second == Pauli::I);
    EXPECT_TRUE(seen.insert({static_cast<int>(t.first), static_cast<int>(t.second)}).second);
  }
  EXPECT_NEAR(two.total_probability(), 0.015, 1e-15);
}

TEST(AttachNoise, ZeroRatesGiveNoChannels) {
  const auto layout = build_rotated_surface_code(3);
  NoiseParams params;
  const auto c = attach_noise(layout, full_schedule(layout), params);
  EXPECT_TRUE(c.channels.empty());
  EXPECT_EQ(c.num_records, layout.ancillas.size());
}

TEST(AttachNoise, ChannelInventory) {
  const auto layout = build_rotated_surface_code(5);
  const auto sched = full_schedule(layout);
  NoiseParams params;
  params.p_g = 1e-3;
  params.T = coherence_from_idle(1e-3);
  params.crosstalk = UniformCrosstalk{1e-4};
  const auto c = attach_noise(layout, sched, params);
  EXPECT_EQ(count_kind(c, ChannelKind::gate), 80U);
  EXPECT_EQ(count_kind(c, ChannelKind::crosstalk), 4U * 760U);

  // Each qubit is either acted on or idles during every step, so summed
  // per-qubit idle time is the round duration minus its busy time.
  const double round = 4 * 1.0 + 2 * 0.1 + 5.0;
  EXPECT_NEAR(c.duration(), round, 1e-12);
  std::vector<double> idle_time(layout.num_qubits(), 0.0);
  for (const auto& ch : c.channels) {
    if (ch.kind != ChannelKind::idle) continue;
    const double p = ch.total_probability();
    idle_time[ch.q0] += -params.T * std::log1p(-4.0 * p / 3.0);
  }
  for (QubitId q = 0; q < layout.num_qubits(); ++q) {
    double busy = 0.0;
    for (const auto& layer : layout.cnot_layers) {
      for (const auto& g : layer) busy += (g.control == q || g.target == q) ? 1.0 : 0.0;
    }
    if (!layout.is_data(q)) {
      busy += 5.0;  // measured
      if (layout.ancillas[q - layout.num_data()].basis == Basis::X) busy += 0.2;
    }
    EXPECT_NEAR(idle_time[q] + busy, round, 1e-9) << "qubit " << q;
  }
}

TEST(AttachNoise, SerialHasNoCrosstalk) {
  const auto layout = build_rotated_surface_code(3);
  NoiseParams params;
  params.crosstalk = UniformCrosstalk{1e-3};
  const auto c = attach_noise(layout, schedule_gates(layout, 1), params);
  EXPECT_EQ(count_kind(c, ChannelKind::crosstalk), 0U);
}

TEST(AttachNoise, DepolarizingKindExpandsTo15Terms) {
  const auto layout = build_rotated_surface_code(3);
  NoiseParams params;
  params.crosstalk = UniformCrosstalk{1.5e-3};
  params.crosstalk_kind = CrosstalkKind::depolarizing;
  const auto c = attach_noise(layout, full_schedule(layout), params);
  for (const auto& ch : c.channels) {
    ASSERT_EQ(ch.kind, ChannelKind::crosstalk);
    EXPECT_EQ(ch.terms.size(), 15U);
    EXPECT_NEAR(ch.total_probability(), 1.5e-3, 1e-17);
  }
}

TEST(NoiseParams, ValidationAndConfig) {
  NoiseParams bad;
  bad.p_g = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = NoiseParams{};
  bad.T = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = NoiseParams{};
  bad.crosstalk = PowerLawCrosstalk{0.015, -1.0, 4.0, std::nullopt};
  EXPECT_THROW(bad.validate(), std::invalid_argument);

  auto cfg = Config::parse("noise.p = 1e-3\n");
  auto p = NoiseParams::from_config(cfg.section("noise"));
  EXPECT_DOUBLE_EQ(p.p_g, 1e-3);
  EXPECT_NEAR(idle_error_prob(1.0, p.T), 1e-3, 1e-15);
  EXPECT_DOUBLE_EQ(std::get<UniformCrosstalk>(p.crosstalk).p_c, 1e-3);

  cfg = Config::parse(
      "noise.p_g = 2e-3\nnoise.T = 3000\nnoise.crosstalk.model = power_law\nnoise.crosstalk.gamma = 5\n"
      "noise.crosstalk.kind = depolarizing\nnoise.durations.measurement = 4\n");
  p = NoiseParams::from_config(cfg.section("noise"));
  EXPECT_DOUBLE_EQ(p.T, 3000.0);
  EXPECT_DOUBLE_EQ(std::get<PowerLawCrosstalk>(p.crosstalk).gamma, 5.0);
  EXPECT_DOUBLE_EQ(std::get<PowerLawCrosstalk>(p.crosstalk).c, 0.015);
  EXPECT_EQ(p.crosstalk_kind, CrosstalkKind::depolarizing);
  EXPECT_DOUBLE_EQ(p.durations.measurement, 4.0);

  cfg = Config::parse("noise.T = 10\nnoise.p_i = 1e-3\n");
  EXPECT_THROW(NoiseParams::from_config(cfg.section("noise")), ConfigError);
}
