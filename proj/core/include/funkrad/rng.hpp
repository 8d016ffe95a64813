#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace funkrad {

/// Deterministic random source with pinned value semantics. The engine is
/// std::mt19937_64 (bit-stream fixed by the standard); the mappings to
/// doubles are spelled out here instead of using std::uniform_real_distribution
/// and friends, whose output is implementation-defined. Identical seeds
/// therefore give identical bytes on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer on [0, n).
  int uniform_int(int n) {
    return static_cast<int>(uniform() * n);
  }

  /// Standard normal via Box-Muller; generates pairs, caches the second.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]; keeps log() finite
    double u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 6.28318530717958647692 * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace funkrad
