#pragma once

#include <cmath>
#include <cstdint>

namespace sigkit {

// Deterministic PRNG (xoshiro256++ seeded through splitmix64). Produces the
// same stream on every platform, which is what lets tests freeze expected
// values and lets whole runs be byte-reproducible from a single seed.
//
// substream(i) derives an independent generator from the root seed and an
// index, so parallel loops can hand one stream to each iteration and get
// schedule-independent results.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& w : state_) w = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Standard normal via Box-Muller. One value per call, no cached spare, so
  // the mapping from stream position to output is position-independent.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t bounded(std::uint64_t n) {
    // Lemire multiply-shift; bias is negligible for the ranges used here.
    const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  Rng substream(std::uint64_t idx) const { return Rng(mix(seed_, idx)); }

  std::uint64_t seed() const { return seed_; }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t idx) {
    std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL + idx * 0xD1B54A32D192ED03ULL);
    splitmix64(x);
    return x;
  }

  std::uint64_t seed_;
  std::uint64_t state_[4];
};

}  // namespace sigkit
