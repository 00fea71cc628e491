#pragma once

#include <cstdint>

namespace dsnet {

// Stateless counter-based generator: every draw is a pure function of
// (seed, stream, index), so replaying a stream after a rollback reproduces
// the same values as long as the index cursor is restored.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

// Uniform double in [0, 1) built from the top 53 bits.
constexpr double to_unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Purposes are mixed into the stream id so different consumers at the same
// LP never share draws.
enum class RngPurpose : std::uint32_t {
  Destination = 1,
  DsField = 2,
  InterArrival = 3,
  Phase = 4,
  Red = 5,
  Topology = 6,
  Test = 7,
};

constexpr std::uint64_t stream_id(std::uint64_t lp, RngPurpose purpose) {
  return (lp << 8) | static_cast<std::uint64_t>(purpose);
}

// A stream plus its cursor. Copyable; the cursor is part of whatever state
// owns it and is restored with snapshots.
struct CounterRng {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t cursor = 0;

  std::uint64_t next_u64() { return counter_hash(seed, stream, cursor++); }
  double next_unit() { return to_unit_interval(next_u64()); }

  // Uniform integer in [0, bound); bound must be > 0. Uses rejection to
  // stay unbiased.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x < limit) return x % bound;
    }
  }

  friend bool operator==(const CounterRng&, const CounterRng&) = default;
};

}  // namespace dsnet
