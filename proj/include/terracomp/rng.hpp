#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace terracomp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derives an independent sub-stream seed from a master seed, a purpose
/// name, and an optional index. All randomness in the pipeline flows from
/// one master seed through this function.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the purpose name
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t s = master ^ h ^ (index * 0x9e3779b97f4a7c15ull);
  splitmix64(s);
  return splitmix64(s);
}

/// mt19937_64 with hand-rolled output transforms. The engine's output
/// sequence is fixed by the standard and the transforms below are ours,
/// so streams are reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Unbiased integer in [0, n). n must be >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    std::uint64_t v;
    do {
      v = eng_();
    } while (v < threshold);
    return v % n;
  }

  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller, caching the spare value.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Poisson draw; Knuth multiplication for small means, rounded normal
  /// approximation above that.
  std::uint64_t next_poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 50.0) {
      const double limit = std::exp(-mean);
      double p = 1.0;
      std::uint64_t k = 0;
      do {
        ++k;
        p *= next_double();
      } while (p > limit);
      return k - 1;
    }
    const double v = mean + std::sqrt(mean) * next_normal();
    return v <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(v));
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace terracomp
