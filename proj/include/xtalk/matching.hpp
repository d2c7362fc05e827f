#pragma once

#include <cstdint>
#include <vector>

namespace xtalk {

struct WeightedEdge {
  int u = 0;
  int v = 0;
  std::int64_t weight = 0;
};

/// Maximum-weight matching on a general graph (Edmonds' blossom algorithm with
/// primal-dual updates, O(n^3)). With `max_cardinality` the result is the
/// maximum-weight matching among those of maximum cardinality. Integer
/// weights keep every dual update exact. Returns mate[v] or -1.
std::vector<int> max_weight_matching(int num_vertices, const std::vector<WeightedEdge>& edges,
                                     bool max_cardinality);

/// Minimum-weight perfect matching. Returns an empty vector if no perfect
/// matching exists.
std::vector<int> min_weight_perfect_matching(int num_vertices, const std::vector<WeightedEdge>& edges);

}  // namespace xtalk
