#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "xtalk/code.hpp"

using namespace xtalk;

namespace {

// Minimal symbolic propagation used as an independent check of the layout:
// X on a control copies to the target, Z on a target copies to the control.
struct Frame {
  std::vector<int> x, z;
  explicit Frame(std::size_t n) : x(n, 0), z(n, 0) {}
  void cnot(const Cnot& g) {
    x[g.target] ^= x[g.control];
    z[g.control] ^= z[g.target];
  }
};

void run_layers(const CodeLayout& layout, Frame& f, int from_layer) {
  for (int layer = from_layer; layer < 4; ++layer) {
    for (const Cnot& g : layout.cnot_layers[layer]) f.cnot(g);
  }
}

std::vector<QubitId> data_support(const CodeLayout& layout, const std::vector<int>& bits) {
  std::vector<QubitId> out;
  for (QubitId q = 0; q < layout.num_data(); ++q) {
    if (bits[q]) out.push_back(q);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Code, RejectsInvalidDistance) {
  EXPECT_THROW(build_rotated_surface_code(4), std::invalid_argument);
  EXPECT_THROW(build_rotated_surface_code(1), std::invalid_argument);
  EXPECT_THROW(build_rotated_surface_code(-3), std::invalid_argument);
}

class CodeByDistance : public ::testing::TestWithParam<int> {};

TEST_P(CodeByDistance, CountsAndLayers) {
  const int d = GetParam();
  const auto layout = build_rotated_surface_code(d);
  EXPECT_EQ(layout.num_data(), static_cast<std::size_t>(d * d));
  EXPECT_EQ(layout.ancillas.size(), static_cast<std::size_t>(d * d - 1));
  EXPECT_EQ(layout.num_qubits(), static_cast<std::size_t>(2 * d * d - 1));
  for (const auto& layer : layout.cnot_layers) {
    EXPECT_EQ(layer.size(), static_cast<std::size_t>(d * (d - 1)));
    std::set<QubitId> seen;
    for (const auto& g : layer) {
      EXPECT_TRUE(seen.insert(g.control).second);
      EXPECT_TRUE(seen.insert(g.target).second);
    }
  }
  // Bulk stabilizers appear in all 4 layers, boundary ones in exactly 2.
  std::vector<int> per_ancilla(layout.ancillas.size(), 0);
  for (const auto& layer : layout.cnot_layers) {
    for (const auto& g : layer) ++per_ancilla[layout.ancilla_of(g)];
  }
  int boundary = 0;
  for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
    const auto size = layout.plaquettes[a].size();
    ASSERT_TRUE(size == 2 || size == 4);
    EXPECT_EQ(per_ancilla[a], static_cast<int>(size));
    if (size == 2) ++boundary;
  }
  EXPECT_EQ(boundary, 2 * (d - 1));
}

TEST_P(CodeByDistance, CnotDirectionFollowsStabilizerType) {
  const auto layout = build_rotated_surface_code(GetParam());
  for (const auto& layer : layout.cnot_layers) {
    for (const auto& g : layer) {
      const auto& anc = layout.ancillas[layout.ancilla_of(g)];
      if (anc.basis == Basis::X) {
        EXPECT_FALSE(layout.is_data(g.control));
      } else {
        EXPECT_FALSE(layout.is_data(g.target));
      }
    }
  }
}

TEST_P(CodeByDistance, StabilizersAndLogicalsCommute) {
  const auto layout = build_rotated_surface_code(GetParam());
  const auto lx = logical_x(layout);
  const auto lz = logical_z(layout);
  EXPECT_FALSE(commutes(lx, lz));
  EXPECT_EQ(lx.x.size(), static_cast<std::size_t>(GetParam()));
  EXPECT_EQ(lz.z.size(), static_cast<std::size_t>(GetParam()));
  for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
    const auto sa = stabilizer_operator(layout, a);
    EXPECT_TRUE(commutes(sa, lx));
    EXPECT_TRUE(commutes(sa, lz));
    for (std::size_t b = a + 1; b < layout.ancillas.size(); ++b) {
      EXPECT_TRUE(commutes(sa, stabilizer_operator(layout, b)));
    }
  }
}

TEST_P(CodeByDistance, NoiselessRoundPreservesStabilizersAndLogicals) {
  // Conjugating by the full round (ancillas outside the support) maps every
  // data-supported stabilizer and logical to itself.
  const auto layout = build_rotated_surface_code(GetParam());
  const std::size_t n = layout.num_qubits();
  auto check = [&](const PauliSupport& op) {
    Frame f(n);
    for (auto q : op.x) f.x[q] = 1;
    for (auto q : op.z) f.z[q] = 1;
    run_layers(layout, f, 0);
    // The image may pick up ancilla factors but must act identically on data.
    std::vector<int> x0(n, 0), z0(n, 0);
    for (auto q : op.x) x0[q] = 1;
    for (auto q : op.z) z0[q] = 1;
    for (QubitId q = 0; q < layout.num_data(); ++q) {
      EXPECT_EQ(f.x[q], x0[q]);
      EXPECT_EQ(f.z[q], z0[q]);
    }
    // X-type operators leave X only on X ancillas (which the H maps to Z and
    // the measurement absorbs); symmetrically for Z.
    for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
      const QubitId q = layout.ancilla_qubit(a);
      if (layout.ancillas[a].basis == Basis::Z) {
        EXPECT_EQ(f.x[q], 0);
      } else {
        EXPECT_EQ(f.z[q], 0);
      }
    }
  };
  for (std::size_t a = 0; a < layout.ancillas.size(); ++a) check(stabilizer_operator(layout, a));
  check(logical_x(layout));
  check(logical_z(layout));
}

TEST_P(CodeByDistance, HookErrorsRunPerpendicularToLogicals) {
  // A fault on an ancilla mid-plaquette spreads X errors along a row and Z
  // errors along a column, never along the logical of the same type.
  const auto layout = build_rotated_surface_code(GetParam());
  const std::size_t n = layout.num_qubits();
  for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
    if (layout.plaquettes[a].size() != 4) continue;
    const QubitId q = layout.ancilla_qubit(a);
    Frame f(n);
    const bool x_type = layout.ancillas[a].basis == Basis::X;
    (x_type ? f.x : f.z)[q] = 1;
    run_layers(layout, f, 2);
    const auto support = data_support(layout, x_type ? f.x : f.z);
    ASSERT_EQ(support.size(), 2U);
    const Coord c0 = layout.coord(support[0]);
    const Coord c1 = layout.coord(support[1]);
    if (x_type) {
      EXPECT_EQ(c0.y, c1.y);
    } else {
      EXPECT_EQ(c0.x, c1.x);
    }
  }
}

TEST_P(CodeByDistance, SingleDataErrorFlipsTwoBulkStabilizers) {
  const auto layout = build_rotated_surface_code(GetParam());
  const int d = GetParam();
  for (QubitId q = 0; q < layout.num_data(); ++q) {
    const Coord c = layout.coord(q);
    const bool bulk = c.x > 1 && c.x < 2 * d - 1 && c.y > 1 && c.y < 2 * d - 1;
    if (!bulk) continue;
    int z_hits = 0;
    int x_hits = 0;
    for (std::size_t a = 0; a < layout.ancillas.size(); ++a) {
      const auto& p = layout.plaquettes[a];
      if (std::find(p.begin(), p.end(), q) == p.end()) continue;
      (layout.ancillas[a].basis == Basis::Z ? z_hits : x_hits)++;
    }
    EXPECT_EQ(z_hits, 2);
    EXPECT_EQ(x_hits, 2);
  }
}

INSTANTIATE_TEST_SUITE_P(Distances, CodeByDistance, ::testing::Values(3, 5, 7, 9));

TEST(Code, CrosstalkOnSecondLayerAncillasBecomesWeightFour) {
  // X on the control of an X-plaquette CNOT and Z on the target of a
  // Z-plaquette CNOT, both in the second layer, after the gates of that layer.
  const auto layout = build_rotated_surface_code(5);
  const std::size_t n = layout.num_qubits();
  int found = 0;
  for (const Cnot& gx : layout.cnot_layers[1]) {
    const auto ax = layout.ancilla_of(gx);
    if (layout.ancillas[ax].basis != Basis::X || layout.plaquettes[ax].size() != 4) continue;
    for (const Cnot& gz : layout.cnot_layers[1]) {
      const auto az = layout.ancilla_of(gz);
      if (layout.ancillas[az].basis != Basis::Z || layout.plaquettes[az].size() != 4) continue;
      Frame f(n);
      f.x[gx.control] = 1;
      f.z[gz.target] = 1;
      run_layers(layout, f, 2);
      const auto xs = data_support(layout, f.x);
      const auto zs = data_support(layout, f.z);
      EXPECT_EQ(xs.size() + zs.size(), 4U);
      ++found;
    }
  }
  EXPECT_GT(found, 0);
}

TEST(Schedule, GroupCounts) {
  const auto layout = build_rotated_surface_code(5);
  EXPECT_EQ(schedule_gates(layout, 20).groups.size(), 4U);
  EXPECT_EQ(schedule_gates(layout, 1).groups.size(), 80U);
  EXPECT_EQ(schedule_gates(layout, 6).groups.size(), 16U);
  EXPECT_EQ(schedule_gates(layout, 6).k, 6);
  EXPECT_THROW(schedule_gates(layout, 0), std::invalid_argument);
}

TEST(Schedule, GroupsPartitionLayersInOrder) {
  const auto layout = build_rotated_surface_code(5);
  for (auto policy : {GroupingPolicy::raster, GroupingPolicy::randomized}) {
    for (int k : {1, 3, 7, 20}) {
      const auto s = schedule_gates(layout, k, policy, 99);
      std::array<std::multiset<std::pair<QubitId, QubitId>>, 4> got;
      int last_layer = 0;
      for (std::size_t g = 0; g < s.groups.size(); ++g) {
        EXPECT_LE(s.groups[g].size(), static_cast<std::size_t>(k));
        EXPECT_GE(s.layer_of_group[g], last_layer);
        last_layer = s.layer_of_group[g];
        for (const auto& gate : s.groups[g]) got[s.layer_of_group[g]].insert({gate.control, gate.target});
      }
      for (int layer = 0; layer < 4; ++layer) {
        std::multiset<std::pair<QubitId, QubitId>> want;
        for (const auto& gate : layout.cnot_layers[layer]) want.insert({gate.control, gate.target});
        EXPECT_EQ(got[layer], want);
      }
    }
  }
}

TEST(Schedule, RasterIsPureAndRandomizedDependsOnSeed) {
  const auto layout = build_rotated_surface_code(5);
  EXPECT_EQ(serialize_schedule(layout, schedule_gates(layout, 6)),
            serialize_schedule(layout, schedule_gates(layout, 6)));
  const auto r1 = serialize_schedule(layout, schedule_gates(layout, 6, GroupingPolicy::randomized, 1));
  const auto r1b = serialize_schedule(layout, schedule_gates(layout, 6, GroupingPolicy::randomized, 1));
  const auto r2 = serialize_schedule(layout, schedule_gates(layout, 6, GroupingPolicy::randomized, 2));
  EXPECT_EQ(r1, r1b);
  EXPECT_NE(r1, r2);
}

TEST(Embedding, CnotPairsAreNearestNeighbours) {
  for (int d : {3, 5, 11}) {
    const auto layout = build_rotated_surface_code(d);
    for (const auto& layer : layout.cnot_layers) {
      for (const auto& g : layer) {
        EXPECT_NEAR(distance(lattice_position(layout.coord(g.control)), lattice_position(layout.coord(g.target))),
                    1.0, 1e-12);
      }
    }
    // Distinct qubits occupy distinct sites at least one lattice constant apart.
    double dmin = 1e9;
    for (QubitId a = 0; a < layout.num_qubits(); ++a) {
      for (QubitId b = a + 1; b < layout.num_qubits(); ++b) {
        dmin = std::min(dmin, distance(lattice_position(layout.coord(a)), lattice_position(layout.coord(b))));
      }
    }
    EXPECT_NEAR(dmin, 1.0, 1e-12);
  }
}

TEST(Sublattice, GroupCountsAndSeparation) {
  struct Case {
    int d, l;
  };
  for (const auto [d, l] : {Case{5, 1}, Case{9, 2}, Case{17, 4}, Case{13, 3}}) {
    const auto layout = build_rotated_surface_code(d);
    const auto s = sublattice_schedule(layout, l);
    EXPECT_EQ(s.groups.size(), static_cast<std::size_t>(8 * l * l));
    EXPECT_EQ(s.num_gates(), static_cast<std::size_t>(4 * d * (d - 1)));
    for (const auto& group : s.groups) {
      for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
          double sep = 1e9;
          for (QubitId a : {group[i].control, group[i].target}) {
            for (QubitId b : {group[j].control, group[j].target}) {
              sep = std::min(sep, distance(lattice_position(layout.coord(a)), lattice_position(layout.coord(b))));
            }
          }
          EXPECT_GE(sep, 2 * l - 1 - 1e-9) << "d=" << d << " l=" << l;
        }
      }
    }
  }
  EXPECT_THROW(sublattice_schedule(build_rotated_surface_code(3), 0), std::invalid_argument);
}

TEST(Golden, D3LayoutAndSchedule) {
  const auto layout = build_rotated_surface_code(3);
  EXPECT_EQ(serialize_layout(layout), read_file(std::string(XTALK_TEST_DATA) + "/d3_layout.txt"));
  EXPECT_EQ(serialize_schedule(layout, full_schedule(layout)),
            read_file(std::string(XTALK_TEST_DATA) + "/d3_schedule.txt"));
}
