#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace seqdec {

// splitmix64 finalizer; used to derive decorrelated seed lanes from one user seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t seed_lane(std::uint64_t seed, std::uint64_t lane) {
  return splitmix64(splitmix64(seed) ^ splitmix64(lane + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t seed_lane(std::uint64_t seed, std::uint64_t lane_a, std::uint64_t lane_b) {
  return seed_lane(seed_lane(seed, lane_a), lane_b);
}

// Deterministic RNG wrapper. Gaussians come from an explicit Box-Muller transform
// (std::normal_distribution output is implementation-defined) so streams are
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  bool bernoulli(double p_one) { return uniform() < p_one; }

  // Standard normal via Box-Muller; generates pairs, caches the second value.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace seqdec
