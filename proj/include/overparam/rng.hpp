#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace overparam {

// splitmix64 finalizer; used only for key derivation, never as the stream itself.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a sequence of keys.
/// The derivation is fixed: changing it changes every experiment output.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t s = mix64(seed);
  for (auto k : keys) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream keys so that different consumers of one top-level seed never collide.
enum class StreamKey : std::uint64_t {
  init = 1,
  data = 2,
  replication = 3,
  trial = 4,
  probe = 5,
  perturbation = 6,
  estimator = 7,
};

/// Seedable 64-bit generator (mt19937_64) with portable real-valued draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Rng split(std::initializer_list<std::uint64_t> keys) const {
    return Rng(derive_seed(seed_of_state(), keys));
  }

  std::uint64_t next_u64() { return engine_(); }

  // [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform index in [0, n) by rejection (no modulo bias).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  bool coin() { return (engine_() >> 63) != 0; }

  double sign() { return coin() ? 1.0 : -1.0; }

 private:
  // A copy of the engine produces the next value without advancing this one.
  std::uint64_t seed_of_state() const {
    auto copy = engine_;
    return copy();
  }

  std::mt19937_64 engine_;
};

inline Rng make_rng(std::uint64_t seed, StreamKey key, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, {static_cast<std::uint64_t>(key), index}));
}

}  // namespace overparam
