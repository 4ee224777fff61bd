#pragma once

#include <cmath>
#include <cstdint>

namespace ssmcast {

// Deterministic 64-bit generator built on the splitmix64 mixer.
// fork(tag) derives an independent child stream from the construction seed
// and the tag alone, so children do not depend on how much the parent drew.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Rng fork(std::uint64_t tag) const {
    std::uint64_t z = seed_ ^ (0xD1B54A32D192ED03ULL + tag * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; has_spare_ = false; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable 64-bit hash for strings (FNV-1a), used to derive per-clip streams.
inline std::uint64_t hash_str(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (; *s; ++s) {
    h ^= static_cast<std::uint8_t>(*s);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace ssmcast
