#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <limits>
#include <random>

#include "xtalk/matching.hpp"

using namespace xtalk;

namespace {

constexpr std::int64_t kNone = std::numeric_limits<std::int64_t>::min();

// Exhaustive search over all matchings. Returns the best (cardinality, weight)
// under the requested objective.
struct BruteResult {
  int cardinality = 0;
  std::int64_t weight = 0;
};

BruteResult brute_max(int n, const std::vector<WeightedEdge>& edges, bool max_cardinality) {
  std::vector<std::vector<std::int64_t>> w(n, std::vector<std::int64_t>(n, kNone));
  for (const auto& e : edges) {
    if (e.u == e.v) continue;
    w[e.u][e.v] = std::max(w[e.u][e.v], e.weight);
    w[e.v][e.u] = w[e.u][e.v];
  }
  BruteResult best{0, 0};
  std::vector<char> used(n, 0);
  std::function<void(int, int, std::int64_t)> rec = [&](int i, int card, std::int64_t total) {
    while (i < n && used[i]) ++i;
    if (i == n) {
      const bool better = max_cardinality
                              ? (card > best.cardinality || (card == best.cardinality && total > best.weight))
                              : total > best.weight;
      if (better) best = {card, total};
      return;
    }
    used[i] = 1;
    rec(i + 1, card, total);  // i stays single
    for (int j = i + 1; j < n; ++j) {
      if (used[j] || w[i][j] == kNone) continue;
      used[j] = 1;
      rec(i + 1, card + 1, total + w[i][j]);
      used[j] = 0;
    }
    used[i] = 0;
  };
  rec(0, 0, 0);
  return best;
}

std::int64_t matching_weight(const std::vector<int>& mate, const std::vector<WeightedEdge>& edges, int* card) {
  std::int64_t total = 0;
  *card = 0;
  for (std::size_t v = 0; v < mate.size(); ++v) {
    const int u = mate[v];
    if (u < 0 || static_cast<std::size_t>(u) < v) continue;
    EXPECT_EQ(mate[static_cast<std::size_t>(u)], static_cast<int>(v));
    std::int64_t best = kNone;
    for (const auto& e : edges) {
      if ((e.u == static_cast<int>(v) && e.v == u) || (e.v == static_cast<int>(v) && e.u == u)) {
        best = std::max(best, e.weight);
      }
    }
    EXPECT_NE(best, kNone) << "matched pair is not an edge";
    total += best;
    ++*card;
  }
  return total;
}

std::vector<WeightedEdge> random_graph(std::mt19937_64& rng, int n, double density, std::int64_t wmax) {
  std::uniform_real_distribution<double> coin(0, 1);
  std::uniform_int_distribution<std::int64_t> weight(1, wmax);
  std::vector<WeightedEdge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng) < density) edges.push_back({i, j, weight(rng)});
    }
  }
  return edges;
}

}  // namespace

TEST(Blossom, TrivialCases) {
  EXPECT_TRUE(max_weight_matching(0, {}, false).empty());
  const auto m = max_weight_matching(2, {{0, 1, 5}}, false);
  EXPECT_EQ(m, (std::vector<int>{1, 0}));
  // Path a-b-c-d with heavy middle edge.
  const auto p = max_weight_matching(4, {{0, 1, 2}, {1, 2, 5}, {2, 3, 2}}, false);
  EXPECT_EQ(p, (std::vector<int>{-1, 2, 1, -1}));
  const auto pc = max_weight_matching(4, {{0, 1, 2}, {1, 2, 5}, {2, 3, 2}}, true);
  EXPECT_EQ(pc, (std::vector<int>{1, 0, 3, 2}));
}

TEST(Blossom, OddCycleNeedsBlossom) {
  // Triangle with a pendant: optimal uses the pendant edge and one cycle edge.
  const std::vector<WeightedEdge> e{{0, 1, 6}, {1, 2, 6}, {0, 2, 6}, {2, 3, 5}};
  const auto m = max_weight_matching(4, e, false);
  int card = 0;
  EXPECT_EQ(matching_weight(m, e, &card), 11);
}

TEST(Blossom, RandomMaxWeightAgreesWithBruteForce) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 9);
    const double density = 0.3 + 0.7 * static_cast<double>(rng() % 100) / 100.0;
    const auto edges = random_graph(rng, n, density, trial % 2 ? 10 : 1000);
    for (bool maxcard : {false, true}) {
      const auto mate = max_weight_matching(n, edges, maxcard);
      ASSERT_EQ(mate.size(), static_cast<std::size_t>(n));
      int card = 0;
      const auto weight = matching_weight(mate, edges, &card);
      const auto want = brute_max(n, edges, maxcard);
      if (maxcard) {
        EXPECT_EQ(card, want.cardinality) << "trial " << trial;
      }
      EXPECT_EQ(weight, want.weight) << "trial " << trial << " maxcard " << maxcard;
    }
  }
}

TEST(Blossom, RandomMinWeightPerfectAgreesWithBruteForce) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 * (1 + static_cast<int>(rng() % 5));
    const auto edges = random_graph(rng, n, 0.4 + 0.6 * (trial % 3) / 2.0, 500);
    const auto mate = min_weight_perfect_matching(n, edges);
    // Oracle: min-weight perfect = max-weight on negated weights, restricted to perfect.
    std::vector<WeightedEdge> neg = edges;
    for (auto& e : neg) e.weight = -e.weight;
    const auto want = brute_max(n, neg, true);
    if (want.cardinality * 2 < n) {
      EXPECT_TRUE(mate.empty()) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(mate.size(), static_cast<std::size_t>(n)) << "trial " << trial;
    std::int64_t total = 0;
    for (int v = 0; v < n; ++v) {
      ASSERT_GE(mate[v], 0);
      if (mate[v] < v) continue;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& e : edges) {
        if ((e.u == v && e.v == mate[v]) || (e.v == v && e.u == mate[v])) best = std::min(best, e.weight);
      }
      total += best;
    }
    EXPECT_EQ(total, -want.weight) << "trial " << trial;
  }
}

TEST(Blossom, ZeroWeightEdgesAndLargeWeights) {
  const std::int64_t big = std::int64_t{1} << 40;
  const std::vector<WeightedEdge> e{{0, 1, big}, {2, 3, big}, {0, 2, 0}, {1, 3, 0}, {0, 3, big + 1}};
  const auto mate = min_weight_perfect_matching(4, e);
  ASSERT_EQ(mate.size(), 4U);
  EXPECT_EQ(mate[0], 2);
  EXPECT_EQ(mate[1], 3);
}
