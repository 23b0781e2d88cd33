#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace evreg {

// Derives independent substream seeds from a master seed. Used so that
// replicate r of study s always sees the same stream regardless of scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream));
}

// Deterministic generator with hand-rolled transforms. The standard
// distribution adaptors are implementation-defined, which would break
// bit-reproducibility of study outputs across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on the open interval (0,1); never returns an exact endpoint.
  double uniform() {
    const std::uint64_t bits = eng_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with one cached variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Geometric on {1,2,...} with mean m >= 1 (success probability 1/m).
  std::int64_t geometric_mean(double m) {
    if (m <= 1.0) return 1;
    const double p = 1.0 / m;
    const double k = std::floor(std::log(uniform()) / std::log1p(-p));
    return 1 + static_cast<std::int64_t>(k);
  }

  // Uniform integer in [0, n).
  std::int64_t below(std::int64_t n) {
    return static_cast<std::int64_t>(eng_() % static_cast<std::uint64_t>(n));
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace evreg
