#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace genac {

// SplitMix64 finalizer, used for seed derivation only.
constexpr std::uint64_t split_mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic RNG stream with hierarchical derivation. A child stream is a
// pure function of (parent seed, index), so per-trajectory streams can be
// handed to rollout workers and the draw sequence stays identical regardless
// of scheduling. Draws avoid std:: distributions, whose output sequences are
// not pinned by the standard.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed)
      : seed_(seed), engine_(split_mix64(seed ^ 0xA02BD4F79B1C66E3ull)) {}

  RngStream child(std::uint64_t index) const {
    return RngStream(split_mix64(seed_ + 0x9E3779B97F4A7C15ull * (index + 1)));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (no cached spare: two uniforms per draw).
  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Index in [0, n).
  int uniform_int(int n) {
    const int v = static_cast<int>(uniform() * static_cast<double>(n));
    return v < n ? v : n - 1;
  }

  // Draw from a categorical distribution given probabilities summing to ~1.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// In-place Fisher-Yates shuffle of an index vector.
inline void shuffle_indices(std::vector<int>& idx, RngStream& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
}

}  // namespace genac
