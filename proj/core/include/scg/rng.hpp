#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace scg {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic generator for one training run. All floating-point draws are
// derived from raw 64-bit words with fixed mappings, so identical seeds give
// identical streams on any platform with the same build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(detail::splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform clamped away from {0, 1} so nested logs stay finite.
  double uniform_open() {
    const double eps = std::numeric_limits<double>::epsilon();
    double u = uniform();
    if (u < eps) u = eps;
    if (u > 1.0 - eps) u = 1.0 - eps;
    return u;
  }

  // Gumbel(0, beta) via -beta*log(-log(U)); beta == 0 is deterministic zero
  // noise and consumes no draws.
  double gumbel(double beta) {
    if (beta == 0.0) return 0.0;
    return -beta * std::log(-std::log(uniform_open()));
  }

  // Box-Muller with a cached spare draw.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform index in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform_index(static_cast<std::size_t>(hi - lo + 1)));
  }

  // Independent substream for a named purpose (data generation, init, noise).
  Rng fork(std::uint64_t salt) const {
    return Rng(detail::splitmix64(seed_ ^ (salt * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL)));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace scg
