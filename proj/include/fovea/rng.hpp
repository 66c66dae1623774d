#pragma once

#include <cmath>
#include <cstdint>

namespace fovea {

// Deterministic PRNG (splitmix64) with portable uniform/gaussian draws.
// Traces must be byte-identical across runs, so we do not rely on the
// standard library distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Box-Muller; one value per call, the pair partner is cached.
  double gaussian(double mean = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + sigma * spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 1e-300) {
      u1 = next_double();
    }
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + sigma * r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  bool has_spare_{false};
  double spare_{0.0};
};

}  // namespace fovea
