#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qatlaw {

// Deterministic random stream. mt19937_64 output is pinned by the standard;
// the distributions here are hand-rolled so results are identical across
// standard-library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(uniform01() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller, pairwise cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Normal truncated to [-limit, limit] standard deviations, by rejection.
  double trunc_normal(double limit = 2.0) {
    for (;;) {
      const double z = normal();
      if (std::fabs(z) <= limit) return z;
    }
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qatlaw
