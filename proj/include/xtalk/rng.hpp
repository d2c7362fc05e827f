#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace xtalk {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream. The stream is a pure function of its key, so
/// any (seed, batch, channel) triple can be opened independently by any
/// worker without sharing state.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : state_(mix64(key)) {}

  static constexpr CounterRng keyed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
    return CounterRng(mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) + a) ^ mix64(b + 0x9e3779b97f4a7c15ULL));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform double in [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_open0() noexcept { return 1.0 - uniform(); }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; bias is < 2^-64 * n and irrelevant here.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  /// Number of failures before the first success of a Bernoulli(p) sequence.
  std::uint64_t geometric(double log1m_p) noexcept {
    const double g = std::floor(std::log(uniform_open0()) / log1m_p);
    if (!(g < 9.0e18)) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(g);
  }

 private:
  std::uint64_t state_;
};

}  // namespace xtalk
