#pragma once

// Brute-force minimum-weight matching for small defect sets, independent of
// the blossom decoder apart from the integer weight convention.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "xtalk/decode.hpp"

namespace oracle {

using namespace xtalk;

// Independent oracle: Floyd-Warshall on the decoder's integer weights, then
// exhaustive pairing of the defects (each pairs with another or the boundary).
inline std::int64_t brute_force_weight(const MatchingGraph& g, const std::vector<std::uint32_t>& syndrome) {
  const std::size_t V = g.num_detectors + 1;
  const std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 8;
  std::vector<std::int64_t> dist(V * V, inf);
  for (std::size_t v = 0; v < V; ++v) dist[v * V + v] = 0;
  for (const auto& e : g.edges) {
    const auto w = static_cast<std::int64_t>(std::llround(e.weight * MwpmDecoder::kWeightScale));
    dist[e.u * V + e.v] = std::min(dist[e.u * V + e.v], w);
    dist[e.v * V + e.u] = std::min(dist[e.v * V + e.u], w);
  }
  for (std::size_t k = 0; k < V; ++k) {
    for (std::size_t i = 0; i < V; ++i) {
      for (std::size_t j = 0; j < V; ++j) {
        if (dist[i * V + k] + dist[k * V + j] < dist[i * V + j]) dist[i * V + j] = dist[i * V + k] + dist[k * V + j];
      }
    }
  }
  const std::size_t B = g.num_detectors;
  const std::size_t k = syndrome.size();
  std::vector<char> used(k, 0);
  std::function<std::int64_t(std::size_t)> rec = [&](std::size_t i) -> std::int64_t {
    while (i < k && used[i]) ++i;
    if (i == k) return 0;
    used[i] = 1;
    std::int64_t best = inf;
    const std::int64_t to_b = dist[syndrome[i] * V + B];
    if (to_b < inf) best = std::min(best, to_b + rec(i + 1));
    for (std::size_t j = i + 1; j < k; ++j) {
      if (used[j]) continue;
      const std::int64_t d = dist[syndrome[i] * V + syndrome[j]];
      if (d >= inf) continue;
      used[j] = 1;
      best = std::min(best, d + rec(i + 1));
      used[j] = 0;
    }
    used[i] = 0;
    return best;
  };
  return rec(0);
}

inline MatchingGraph random_matching_graph(std::mt19937_64& rng, std::uint32_t n) {
  std::uniform_real_distribution<double> prob(1e-4, 0.45);
  std::uniform_real_distribution<double> coin(0, 1);
  MatchingGraph g;
  g.num_detectors = n;
  for (std::uint32_t u = 0; u < n; ++u) {
    if (coin(rng) < 0.35) g.edges.push_back({u, n, prob(rng), 0.0, coin(rng) < 0.5, {}});
    for (std::uint32_t v = u + 1; v < n; ++v) {
      if (coin(rng) < 0.3) g.edges.push_back({u, v, prob(rng), 0.0, coin(rng) < 0.5, {}});
    }
  }
  // Guarantee every detector reaches the boundary.
  for (std::uint32_t u = 0; u < n; u += 5) g.edges.push_back({u, n, prob(rng), 0.0, false, {}});
  for (std::uint32_t u = 0; u + 1 < n; ++u) g.edges.push_back({u, u + 1, prob(rng), 0.0, false, {}});
  for (auto& e : g.edges) e.weight = edge_weight(e.probability);
  return g;
}

}  // namespace oracle
