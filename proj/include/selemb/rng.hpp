#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace selemb {

// Fixed pseudo-random generator used everywhere randomness is needed:
// dataset shuffles, weight init, synthetic noise. SplitMix64 plus a
// hand-rolled Fisher-Yates and Box-Muller, so that every split and every
// generated signal is reproducible from the documented algorithms alone
// (see docs/FORMATS.md) rather than from a particular standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n); n must be positive.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // In-place Fisher-Yates, descending index, j = next_u64() % (i + 1).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(next_below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// FNV-1a 64-bit, used to fold string tags into derived seeds.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline uint64_t mix_seed(uint64_t seed, uint64_t component) {
  Rng r(seed ^ component);
  return r.next_u64();
}

// Independent stream for a named purpose under a base seed.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
  return mix_seed(mix_seed(seed, fnv1a64(tag)), index);
}

}  // namespace selemb
