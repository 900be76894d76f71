#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "evomem/tensor.hpp"

namespace evomem {

// Deterministic pseudo-random source for reproducible benchmark instances.
// The engine is std::mt19937_64 exactly as laid down by the C++ standard, so
// a given seed produces the same stream on every conforming implementation.
// Doubles are formed from the top 53 bits of each 64-bit output; none of the
// implementation-defined <random> distributions are used.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] via 64-bit modulo (deterministic; the modulo
  // bias is irrelevant for instance generation).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

// Independent sub-stream `stream` of a top-level seed: the engine is seeded
// with seed XOR (golden-ratio constant * (stream + 1)).
inline SeededRng derived_rng(std::uint64_t seed, std::uint64_t stream) {
  return SeededRng(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
}

// Tensor with entries uniform in [lo, hi), rounded to the requested format.
Tensor random_uniform(std::vector<std::int64_t> shape, NumericFormat fmt, SeededRng& rng,
                      double lo = -1.0, double hi = 1.0);

}  // namespace evomem
