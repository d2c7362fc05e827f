#include "xtalk/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>
#include <tuple>

#include "xtalk/matching.hpp"

namespace xtalk {
namespace {

using Key = std::pair<std::vector<std::uint32_t>, bool>;

// Graph edge key: (u, v, observable) with u < v, v = boundary for 1-detector edges.
using EdgeKey = std::tuple<std::uint32_t, std::uint32_t, bool>;

struct EdgeAcc {
  double probability = 0.0;
  std::vector<std::uint32_t> sources;
};

EdgeKey edge_key(const std::vector<std::uint32_t>& dets, bool obs, std::uint32_t boundary) {
  if (dets.size() == 1) return {dets[0], boundary, obs};
  return {std::min(dets[0], dets[1]), std::max(dets[0], dets[1]), obs};
}

// Minimum-weight split of `dets` into existing graphlike symptoms whose
// symmetric difference is `dets` and whose observable bits XOR to `obs`.
std::optional<std::vector<EdgeKey>> split_into_existing(const std::vector<std::uint32_t>& dets, bool obs,
                                                        const std::map<EdgeKey, EdgeAcc>& existing,
                                                        std::uint32_t boundary) {
  const std::size_t m = dets.size();
  if (m == 0 || m > 16) return std::nullopt;
  struct Candidate {
    std::uint32_t mask;
    bool obs;
    double weight;
    EdgeKey key;
  };
  std::vector<Candidate> candidates;
  auto consider = [&](std::vector<std::uint32_t> sub, std::uint32_t mask) {
    for (const bool o : {false, true}) {
      const EdgeKey key = edge_key(sub, o, boundary);
      const auto it = existing.find(key);
      if (it == existing.end()) continue;
      candidates.push_back({mask, o, edge_weight(it->second.probability), key});
    }
  };
  for (std::size_t i = 0; i < m; ++i) {
    consider({dets[i]}, 1U << i);
    for (std::size_t j = i + 1; j < m; ++j) consider({dets[i], dets[j]}, (1U << i) | (1U << j));
  }

  // Dijkstra over (mask, obs) states.
  const std::size_t states = std::size_t{2} << m;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(states, inf);
  std::vector<std::int64_t> via(states, -1);
  std::vector<std::size_t> prev(states, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  best[0] = 0.0;
  heap.push({0.0, 0});
  const std::size_t goal = (((std::size_t{1} << m) - 1) << 1) | (obs ? 1U : 0U);
  while (!heap.empty()) {
    const auto [cost, state] = heap.top();
    heap.pop();
    if (cost > best[state]) continue;
    if (state == goal) break;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const std::size_t next = state ^ ((std::size_t{candidates[c].mask} << 1) | (candidates[c].obs ? 1U : 0U));
      const double nc = cost + candidates[c].weight;
      if (nc < best[next]) {
        best[next] = nc;
        via[next] = static_cast<std::int64_t>(c);
        prev[next] = state;
        heap.push({nc, next});
      }
    }
  }
  if (!std::isfinite(best[goal])) return std::nullopt;
  std::vector<EdgeKey> parts;
  for (std::size_t s = goal; s != 0; s = prev[s]) parts.push_back(candidates[static_cast<std::size_t>(via[s])].key);
  return parts;
}

}  // namespace

double merge_probability(double p1, double p2) { return p1 * (1.0 - p2) + p2 * (1.0 - p1); }

std::string DetectorErrorModel::dump() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& m : mechanisms) {
    out << m.probability;
    for (auto d : m.detectors) out << " D" << d;
    if (m.observable) out << " L0";
    out << '\n';
  }
  return out.str();
}

DetectorErrorModel dem_from_faults(std::size_t num_detectors, const std::vector<SingleFault>& faults,
                                   std::vector<Basis> detector_basis) {
  if (!detector_basis.empty() && detector_basis.size() != num_detectors) {
    throw std::invalid_argument("detector_basis size does not match detector count");
  }
  std::map<Key, std::size_t> index;
  DetectorErrorModel dem;
  dem.num_detectors = num_detectors;
  dem.detector_basis = std::move(detector_basis);
  dem.merged = true;
  for (const auto& f : faults) {
    if (f.detectors.empty() && !f.observable) continue;
    Key key{f.detectors, f.observable};
    auto [it, inserted] = index.try_emplace(key, dem.mechanisms.size());
    if (inserted) {
      dem.mechanisms.push_back({f.probability, f.detectors, f.observable, {}});
    } else {
      auto& m = dem.mechanisms[it->second];
      m.probability = merge_probability(m.probability, f.probability);
    }
    auto& m = dem.mechanisms[it->second];
    if (m.split_hint.empty() && f.split) {
      for (std::size_t part = 0; part < 2; ++part) {
        m.split_hint.push_back({f.part_detectors[part], f.part_observable[part]});
      }
    }
  }
  return dem;
}

DetectorErrorModel build_dem(const NoisyCircuit& circuit) {
  return dem_from_faults(circuit.num_detectors(), enumerate_single_faults(circuit), circuit.detector_basis);
}

double edge_weight(double p) {
  if (!(p > 0.0 && p < 0.5)) throw std::invalid_argument("edge probability must lie in (0, 1/2)");
  return std::log((1.0 - p) / p);
}

MatchingGraph decompose_to_graphlike(const DetectorErrorModel& dem) {
  const auto boundary = static_cast<std::uint32_t>(dem.num_detectors);
  const bool typed = !dem.detector_basis.empty();

  // Splits a symptom into single-type parts; the observable rides on the Z part.
  auto typed_parts = [&](const std::vector<std::uint32_t>& dets, bool obs) {
    std::vector<SymptomPart> parts;
    if (!typed) {
      parts.push_back({dets, obs});
      return parts;
    }
    SymptomPart z{{}, obs};
    SymptomPart x{{}, false};
    for (auto d : dets) (dem.detector_basis[d] == Basis::Z ? z : x).detectors.push_back(d);
    if (!z.detectors.empty() || z.observable) parts.push_back(std::move(z));
    if (!x.detectors.empty()) parts.push_back(std::move(x));
    return parts;
  };

  std::map<EdgeKey, EdgeAcc> existing;
  std::vector<std::uint32_t> pending;
  for (std::uint32_t i = 0; i < dem.mechanisms.size(); ++i) {
    const auto& m = dem.mechanisms[i];
    if (m.detectors.empty()) continue;
    const auto parts = typed_parts(m.detectors, m.observable);
    if (parts.size() == 1 && m.detectors.size() <= 2) {
      auto& acc = existing[edge_key(m.detectors, m.observable, boundary)];
      acc.probability = merge_probability(acc.probability, m.probability);
      acc.sources.push_back(i);
    } else {
      pending.push_back(i);
    }
  }

  std::map<EdgeKey, EdgeAcc> edges = existing;
  auto fold = [&](const EdgeKey& key, double p, std::uint32_t source) {
    auto& acc = edges[key];
    acc.probability = merge_probability(acc.probability, p);
    acc.sources.push_back(source);
  };
  // Appends the edges for one single-type part; false if impossible.
  auto resolve = [&](const SymptomPart& part, std::vector<EdgeKey>& keys) {
    if (part.detectors.empty()) return !part.observable;
    if (part.detectors.size() <= 2) {
      keys.push_back(edge_key(part.detectors, part.observable, boundary));
      return true;
    }
    auto sub = split_into_existing(part.detectors, part.observable, existing, boundary);
    if (!sub) return false;
    keys.insert(keys.end(), sub->begin(), sub->end());
    return true;
  };

  for (const std::uint32_t i : pending) {
    const auto& m = dem.mechanisms[i];
    std::vector<EdgeKey> keys;
    bool ok = true;
    for (const auto& part : typed_parts(m.detectors, m.observable)) ok = ok && resolve(part, keys);
    if (!ok) {
      // Fall back to the symptoms of the fault's single-qubit halves.
      keys.clear();
      ok = !m.split_hint.empty();
      for (const auto& half : m.split_hint) {
        for (const auto& part : typed_parts(half.detectors, half.observable)) ok = ok && resolve(part, keys);
      }
    }
    if (!ok) {
      std::ostringstream msg;
      msg << "mechanism " << i << " with detectors";
      for (auto d : m.detectors) msg << ' ' << d;
      msg << " has no graphlike decomposition";
      throw UndecomposableMechanism(msg.str());
    }
    for (const auto& key : keys) fold(key, m.probability, i);
  }

  // Keep the most probable observable variant of parallel edges.
  MatchingGraph graph;
  graph.num_detectors = dem.num_detectors;
  for (auto it = edges.begin(); it != edges.end(); ++it) {
    const auto& [u, v, obs] = it->first;
    auto twin = edges.find({u, v, !obs});
    if (twin != edges.end() && (twin->second.probability > it->second.probability ||
                                (twin->second.probability == it->second.probability && obs))) {
      continue;
    }
    MatchingEdge e;
    e.u = u;
    e.v = v;
    e.probability = it->second.probability;
    e.weight = edge_weight(e.probability);
    e.observable = obs;
    e.sources = it->second.sources;
    graph.edges.push_back(std::move(e));
  }
  return graph;
}

MwpmDecoder::MwpmDecoder(const MatchingGraph& graph) : n_(graph.num_detectors) {
  const std::size_t V = n_ + 1;
  struct Arc {
    std::uint32_t to;
    std::int64_t w;
    bool obs;
  };
  std::vector<std::vector<Arc>> adj(V);
  for (const auto& e : graph.edges) {
    if (e.u >= V || e.v >= V) throw std::invalid_argument("matching edge endpoint out of range");
    const auto w = static_cast<std::int64_t>(std::llround(e.weight * kWeightScale));
    adj[e.u].push_back({e.v, w, e.observable});
    adj[e.v].push_back({e.u, w, e.observable});
  }
  dist_.assign(V * V, kInfinity);
  parity_.assign(V * V, 0);
  using Item = std::pair<std::int64_t, std::uint32_t>;
  for (std::uint32_t s = 0; s < V; ++s) {
    std::int64_t* dist = &dist_[s * V];
    std::uint8_t* par = &parity_[s * V];
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[s] = 0;
    heap.push({0, s});
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (const Arc& a : adj[u]) {
        const std::int64_t nd = d + a.w;
        if (nd < dist[a.to]) {
          dist[a.to] = nd;
          par[a.to] = par[u] ^ (a.obs ? 1 : 0);
          heap.push({nd, a.to});
        }
      }
    }
  }
}

DecodeResult MwpmDecoder::decode(const std::vector<std::uint32_t>& syndrome) const {
  DecodeResult result;
  const std::size_t k = syndrome.size();
  if (k == 0) return result;
  const auto B = static_cast<std::uint32_t>(n_);
  for (auto s : syndrome) {
    if (s >= n_) throw std::invalid_argument("syndrome detector out of range");
  }

  std::vector<std::int64_t> b(k);
  for (std::size_t i = 0; i < k; ++i) b[i] = distance(syndrome[i], B);

  // Defect pairs closer than their combined boundary distance stay linked.
  std::vector<std::size_t> root(k);
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](std::size_t x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const std::int64_t d = distance(syndrome[i], syndrome[j]);
      if (d < kInfinity && d < b[i] + b[j]) root[find(i)] = find(j);
    }
  }
  std::vector<std::vector<std::size_t>> clusters;
  {
    std::vector<std::int64_t> slot(k, -1);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t r = find(i);
      if (slot[r] < 0) {
        slot[r] = static_cast<std::int64_t>(clusters.size());
        clusters.emplace_back();
      }
      clusters[static_cast<std::size_t>(slot[r])].push_back(i);
    }
  }

  auto disconnected = [&](std::size_t i) {
    return DisconnectedSyndrome("detector " + std::to_string(syndrome[i]) + " cannot be matched");
  };

  for (const auto& cluster : clusters) {
    const std::size_t c = cluster.size();
    if (c == 1) {
      const std::size_t i = cluster[0];
      if (b[i] >= kInfinity) throw disconnected(i);
      result.weight += b[i];
      result.observable ^= path_parity(syndrome[i], B);
      continue;
    }
    if (c == 2) {
      // Linked pairs are strictly cheaper matched together.
      const std::uint32_t u = syndrome[cluster[0]];
      const std::uint32_t v = syndrome[cluster[1]];
      result.weight += distance(u, v);
      result.observable ^= path_parity(u, v);
      continue;
    }
    // Defect i is vertex i, its boundary copy is vertex c + i.
    std::vector<WeightedEdge> edges;
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t a = cluster[i];
      if (b[a] < kInfinity) edges.push_back({static_cast<int>(i), static_cast<int>(c + i), b[a]});
      for (std::size_t j = i + 1; j < c; ++j) {
        const std::size_t bj = cluster[j];
        const std::int64_t d = distance(syndrome[a], syndrome[bj]);
        if (d < kInfinity && d < b[a] + b[bj]) edges.push_back({static_cast<int>(i), static_cast<int>(j), d});
        edges.push_back({static_cast<int>(c + i), static_cast<int>(c + j), 0});
      }
    }
    const auto mate = min_weight_perfect_matching(static_cast<int>(2 * c), edges);
    if (mate.empty()) throw disconnected(cluster[0]);
    for (std::size_t i = 0; i < c; ++i) {
      const auto m = static_cast<std::size_t>(mate[i]);
      const std::uint32_t u = syndrome[cluster[i]];
      if (m == c + i) {
        result.weight += b[cluster[i]];
        result.observable ^= path_parity(u, B);
      } else if (m < c && m > i) {
        const std::uint32_t v = syndrome[cluster[m]];
        result.weight += distance(u, v);
        result.observable ^= path_parity(u, v);
      }
    }
  }
  return result;
}

bool mwpm_decode(const MatchingGraph& graph, const std::vector<std::uint32_t>& syndrome) {
  return MwpmDecoder(graph).predict(syndrome);
}

Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double per_round_rate(double p_total, int rounds) {
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (p_total >= 0.5) return 0.5;
  return 0.5 * -std::expm1(std::log1p(-2.0 * p_total) / rounds);
}

LogicalErrorEstimate estimate_logical_error_rate(const NoisyCircuit& circuit, const MwpmDecoder& decoder,
                                                 std::uint64_t shots, std::uint64_t seed, int workers) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  FrameSimulator sim(circuit);
  const std::size_t batches = (shots + kBatchShots - 1) / kBatchShots;
  std::vector<std::uint64_t> failures(batches, 0);
  const std::size_t n_det = circuit.num_detectors();
  sim.for_each_batch(seed, shots, workers, [&](const FrameBatch& batch) {
    std::vector<std::vector<std::uint32_t>> syndromes(batch.lanes);
    for (std::size_t d = 0; d < n_det; ++d) {
      for (std::size_t w = 0; w < kBatchWords; ++w) {
        std::uint64_t word = batch.detectors[d * kBatchWords + w];
        while (word) {
          const std::size_t lane = w * 64 + static_cast<std::size_t>(__builtin_ctzll(word));
          word &= word - 1;
          syndromes[lane].push_back(static_cast<std::uint32_t>(d));
        }
      }
    }
    std::uint64_t fails = 0;
    for (std::size_t lane = 0; lane < batch.lanes; ++lane) {
      const bool predicted = syndromes[lane].empty() ? false : decoder.predict(syndromes[lane]);
      if (predicted != batch.observable_flip(lane)) ++fails;
    }
    failures[batch.index] = fails;
  });

  LogicalErrorEstimate est;
  est.shots = shots;
  est.failures = std::accumulate(failures.begin(), failures.end(), std::uint64_t{0});
  est.p_total = static_cast<double>(est.failures) / static_cast<double>(shots);
  const int rounds = std::max(1, circuit.rounds);
  est.p_l = per_round_rate(est.p_total, rounds);
  const Interval ci = wilson_interval(est.failures, shots);
  est.ci_low = per_round_rate(ci.low, rounds);
  est.ci_high = per_round_rate(ci.high, rounds);
  return est;
}

LogicalErrorEstimate estimate_logical_error_rate(const NoisyCircuit& circuit, std::uint64_t shots,
                                                 std::uint64_t seed, int workers) {
  const MwpmDecoder decoder(decompose_to_graphlike(build_dem(circuit)));
  return estimate_logical_error_rate(circuit, decoder, shots, seed, workers);
}

double logical_coherence_time(double p_l, double t_cycle) {
  if (!(t_cycle > 0.0)) throw std::invalid_argument("cycle duration must be positive");
  if (!(p_l >= 0.0 && p_l < 0.5)) throw std::invalid_argument("p_L must lie in [0, 1/2)");
  if (p_l == 0.0) return std::numeric_limits<double>::infinity();
  return -t_cycle / std::log1p(-2.0 * p_l);
}

}  // namespace xtalk
