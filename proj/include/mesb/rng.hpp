#pragma once

#include <cstdint>
#include <random>

#include "mesb/tensor.hpp"

namespace mesb {

/// Seeded random stream with a pinned algorithm so that runs are
/// reproducible: std::mt19937_64 (bit-exact per the C++ standard) for the
/// integer stream, uniforms via the top 53 bits, normals via the Marsaglia
/// polar method. Given IEEE-754 doubles and one platform's libm, identical
/// seeds produce identical streams.
///
/// Single-owner by design: not copyable, move-only.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  SeededRng(const SeededRng&) = delete;
  SeededRng& operator=(const SeededRng&) = delete;
  SeededRng(SeededRng&&) = default;
  SeededRng& operator=(SeededRng&&) = default;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal draw.
  double normal();

private:
  std::uint64_t seed_ = 0;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministic seed derivation for sub-streams (phantom i of experiment s,
/// ...). SplitMix64 finalizer over the combined words.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

/// i.i.d. standard normal tensor drawn from `rng`.
Tensor gaussian(const Shape& shape, SeededRng& rng);

}  // namespace mesb
