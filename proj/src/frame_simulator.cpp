#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "xtalk/rng.hpp"
#include "xtalk/sim.hpp"

namespace xtalk {
namespace {

constexpr std::size_t W = kBatchWords;

struct FrameBuffers {
  std::vector<std::uint64_t> x;
  std::vector<std::uint64_t> z;
  std::vector<std::uint64_t> records;

  explicit FrameBuffers(const NoisyCircuit& c)
      : x(std::size_t{c.num_qubits} * W, 0), z(std::size_t{c.num_qubits} * W, 0),
        records(std::size_t{c.num_records} * W, 0) {}

  void flip(QubitId q, Pauli p, std::size_t lane) {
    const std::uint64_t bit = std::uint64_t{1} << (lane % 64);
    const std::size_t w = std::size_t{q} * W + lane / 64;
    if (has_x(p)) x[w] ^= bit;
    if (has_z(p)) z[w] ^= bit;
  }
};

// Runs the Clifford part of the circuit on all lanes, calling
// on_channel(channel_index) where each channel sits.
template <class OnChannel>
void propagate(const NoisyCircuit& c, FrameBuffers& f, OnChannel&& on_channel) {
  for (const Op& op : c.ops) {
    switch (op.kind) {
      case OpKind::reset: {
        std::fill_n(f.x.begin() + op.a * W, W, 0);
        std::fill_n(f.z.begin() + op.a * W, W, 0);
        break;
      }
      case OpKind::hadamard: {
        std::swap_ranges(f.x.begin() + op.a * W, f.x.begin() + (op.a + 1) * W, f.z.begin() + op.a * W);
        break;
      }
      case OpKind::cnot: {
        std::uint64_t* xc = &f.x[op.a * W];
        std::uint64_t* zc = &f.z[op.a * W];
        std::uint64_t* xt = &f.x[op.b * W];
        const std::uint64_t* zt = &f.z[op.b * W];
        for (std::size_t w = 0; w < W; ++w) {
          xt[w] ^= xc[w];
          zc[w] ^= zt[w];
        }
        break;
      }
      case OpKind::measure: {
        std::copy_n(f.x.begin() + op.a * W, W, f.records.begin() + op.index * W);
        break;
      }
      case OpKind::channel: on_channel(op.index); break;
      case OpKind::tick: break;
    }
  }
}

void parity_words(const std::vector<std::uint64_t>& records, const std::vector<std::uint32_t>& recs,
                  std::uint64_t* out) {
  std::fill_n(out, W, 0);
  for (const auto r : recs) {
    for (std::size_t w = 0; w < W; ++w) out[w] ^= records[std::size_t{r} * W + w];
  }
}

void collect(const NoisyCircuit& c, const FrameBuffers& f, FrameBatch& out) {
  out.detectors.assign(c.detectors.size() * W, 0);
  for (std::size_t d = 0; d < c.detectors.size(); ++d) parity_words(f.records, c.detectors[d], &out.detectors[d * W]);
  parity_words(f.records, c.observable, out.observable.data());
}

}  // namespace

int default_workers() {
  if (const char* env = std::getenv("XTALK_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

FrameSimulator::FrameSimulator(const NoisyCircuit& circuit) : circuit_(circuit) {
  compiled_.reserve(circuit.channels.size());
  for (const auto& ch : circuit.channels) {
    CompiledChannel cc;
    cc.probability = std::min(1.0, ch.total_probability());
    cc.log1m_p = std::log1p(-cc.probability);
    double acc = 0.0;
    for (const auto& t : ch.terms) {
      acc += t.probability;
      cc.cumulative.push_back(acc / ch.total_probability());
    }
    if (!cc.cumulative.empty()) cc.cumulative.back() = 1.0;
    compiled_.push_back(std::move(cc));
  }
}

void FrameSimulator::run_batch(std::uint64_t seed, std::size_t batch, std::size_t lanes, FrameBatch& out) const {
  if (lanes > kBatchShots) throw std::invalid_argument("batch larger than kBatchShots");
  FrameBuffers f(circuit_);
  propagate(circuit_, f, [&](std::uint32_t index) {
    const CompiledChannel& cc = compiled_[index];
    if (cc.probability <= 0.0) return;
    const PauliChannel& ch = circuit_.channels[index];
    auto rng = CounterRng::keyed(seed, batch, index);
    auto apply = [&](std::size_t lane) {
      std::size_t t = 0;
      if (ch.terms.size() > 1) {
        const double u = rng.uniform();
        t = static_cast<std::size_t>(std::upper_bound(cc.cumulative.begin(), cc.cumulative.end(), u) -
                                     cc.cumulative.begin());
        t = std::min(t, ch.terms.size() - 1);
      }
      f.flip(ch.q0, ch.terms[t].first, lane);
      if (ch.q1 != kNoQubit) f.flip(ch.q1, ch.terms[t].second, lane);
    };
    if (cc.probability >= 1.0) {
      for (std::size_t lane = 0; lane < lanes; ++lane) apply(lane);
      return;
    }
    std::uint64_t lane = rng.geometric(cc.log1m_p);
    while (lane < lanes) {
      apply(lane);
      const std::uint64_t gap = rng.geometric(cc.log1m_p);
      if (gap >= lanes) break;
      lane += gap + 1;
    }
  });
  out.index = batch;
  out.lanes = lanes;
  collect(circuit_, f, out);
  // Clear lanes past the end so callers can popcount whole words.
  if (lanes < kBatchShots) {
    auto mask_tail = [&](std::uint64_t* words) {
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t lo = w * 64;
        if (lo >= lanes) {
          words[w] = 0;
        } else if (lanes - lo < 64) {
          words[w] &= (std::uint64_t{1} << (lanes - lo)) - 1;
        }
      }
    };
    for (std::size_t d = 0; d < circuit_.detectors.size(); ++d) mask_tail(&out.detectors[d * W]);
    mask_tail(out.observable.data());
  }
}

void FrameSimulator::for_each_batch(std::uint64_t seed, std::size_t shots, int workers,
                                    const std::function<void(const FrameBatch&)>& visit) const {
  const std::size_t batches = (shots + kBatchShots - 1) / kBatchShots;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    FrameBatch batch;
    for (std::size_t b = next++; b < batches; b = next++) {
      run_batch(seed, b, std::min(kBatchShots, shots - b * kBatchShots), batch);
      visit(batch);
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), batches);
  if (threads <= 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t i = 0; i < threads; ++i) {
    pool.emplace_back([&] {
      try {
        work();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = batches;
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

SampleBatch pauli_frame_sample(const NoisyCircuit& circuit, std::size_t shots, std::uint64_t seed, int workers) {
  SampleBatch out;
  out.shots = shots;
  out.num_detectors = circuit.detectors.size();
  out.words_per_shot = (out.num_detectors + 63) / 64;
  out.detector_bits.assign(shots * out.words_per_shot, 0);
  out.observable_flips.assign(shots, 0);
  FrameSimulator sim(circuit);
  // Batches write disjoint shot ranges, so no locking is needed.
  sim.for_each_batch(seed, shots, workers, [&](const FrameBatch& b) {
    const std::size_t base = b.index * kBatchShots;
    for (std::size_t d = 0; d < out.num_detectors; ++d) {
      for (std::size_t w = 0; w < W; ++w) {
        std::uint64_t word = b.detectors[d * W + w];
        while (word) {
          const std::size_t lane = w * 64 + static_cast<std::size_t>(__builtin_ctzll(word));
          word &= word - 1;
          out.detector_bits[(base + lane) * out.words_per_shot + d / 64] |= std::uint64_t{1} << (d % 64);
        }
      }
    }
    for (std::size_t lane = 0; lane < b.lanes; ++lane) out.observable_flips[base + lane] = b.observable_flip(lane);
  });
  return out;
}

void SampleBatch::write_csv(std::ostream& out) const {
  std::string row;
  for (std::size_t s = 0; s < shots; ++s) {
    row.clear();
    for (std::size_t d = 0; d < num_detectors; ++d) {
      row += detector(s, d) ? '1' : '0';
      row += ',';
    }
    row += observable_flips[s] ? '1' : '0';
    row += '\n';
    out << row;
  }
}

void SampleBatch::write_packed(std::ostream& out) const {
  auto put = [&](std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 8);
  };
  put(shots);
  put(num_detectors);
  put(words_per_shot);
  for (auto w : detector_bits) put(w);
  out.write(reinterpret_cast<const char*>(observable_flips.data()), static_cast<std::streamsize>(shots));
}

std::vector<SingleFault> enumerate_single_faults(const NoisyCircuit& circuit) {
  std::vector<SingleFault> faults;
  // Each injection is (fault, part): part 0 applies the whole term, parts 1
  // and 2 only its first or second qubit.
  struct Injection {
    std::size_t fault;
    int part;
  };
  std::vector<Injection> injections;
  for (std::uint32_t c = 0; c < circuit.channels.size(); ++c) {
    const auto& ch = circuit.channels[c];
    for (std::uint32_t t = 0; t < ch.terms.size(); ++t) {
      const PauliTerm& term = ch.terms[t];
      if (term.probability <= 0.0) continue;
      SingleFault f;
      f.channel = c;
      f.term = t;
      f.probability = term.probability;
      f.split = ch.q1 != kNoQubit && term.first != Pauli::I && term.second != Pauli::I;
      injections.push_back({faults.size(), 0});
      if (f.split) {
        injections.push_back({faults.size(), 1});
        injections.push_back({faults.size(), 2});
      }
      faults.push_back(std::move(f));
    }
  }

  FrameBatch batch;
  for (std::size_t begin = 0; begin < injections.size(); begin += kBatchShots) {
    const std::size_t end = std::min(injections.size(), begin + kBatchShots);
    FrameBuffers f(circuit);
    std::size_t next = begin;
    propagate(circuit, f, [&](std::uint32_t index) {
      while (next < end && faults[injections[next].fault].channel < index) ++next;
      for (; next < end && faults[injections[next].fault].channel == index; ++next) {
        const PauliChannel& ch = circuit.channels[index];
        const PauliTerm& term = ch.terms[faults[injections[next].fault].term];
        const int part = injections[next].part;
        if (part != 2) f.flip(ch.q0, term.first, next - begin);
        if (part != 1 && ch.q1 != kNoQubit) f.flip(ch.q1, term.second, next - begin);
      }
    });
    collect(circuit, f, batch);
    auto target = [&](std::size_t lane) -> std::vector<std::uint32_t>& {
      const Injection& inj = injections[begin + lane];
      SingleFault& fault = faults[inj.fault];
      return inj.part == 0 ? fault.detectors : fault.part_detectors[static_cast<std::size_t>(inj.part - 1)];
    };
    for (std::size_t d = 0; d < circuit.detectors.size(); ++d) {
      for (std::size_t w = 0; w < W; ++w) {
        std::uint64_t word = batch.detectors[d * W + w];
        while (word) {
          const std::size_t lane = w * 64 + static_cast<std::size_t>(__builtin_ctzll(word));
          word &= word - 1;
          if (begin + lane < end) target(lane).push_back(static_cast<std::uint32_t>(d));
        }
      }
    }
    for (std::size_t i = begin; i < end; ++i) {
      const Injection& inj = injections[i];
      const bool flip = batch.observable_flip(i - begin);
      if (inj.part == 0) {
        faults[inj.fault].observable = flip;
      } else {
        faults[inj.fault].part_observable[static_cast<std::size_t>(inj.part - 1)] = flip;
      }
    }
  }
  return faults;
}

}  // namespace xtalk
