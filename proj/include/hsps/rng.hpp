// ============================================================================
// rng.hpp -- seeded, splittable random streams
//
// Every Monte Carlo routine in the library draws from a Stream derived from
// (seed, stream index).  Derivation is a pure function so results never depend
// on how work is scheduled across threads.  All variate transforms are written
// here instead of using <random> distributions, whose output is
// implementation-defined.
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace hsps::rng {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for stream `index` of a run seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(index * 0xd1b54a32d192ed03ULL + 1));
}

class Stream {
public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t seed, std::uint64_t index) : engine_(derive_seed(seed, index)) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1], safe as a log argument.
  double uniform_pos() { return 1.0 - uniform(); }

  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's nearly-divisionless method.
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson by CDF inversion; intended for the small per-pulse means (< ~500).
  std::uint64_t poisson(double mean) { return poisson_from(mean, 0); }

  /// Poisson conditioned on a value >= 1.
  std::uint64_t poisson_nonzero(double mean) { return poisson_from(mean, 1); }

  /// Number of failures before the first success, P(success) = p.
  std::uint64_t geometric(double p) {
    if (p >= 1.0) return 0;
    const double g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
    if (!(g < 9.0e18)) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(g);
  }

private:
  std::uint64_t poisson_from(double mean, std::uint64_t k0) {
    if (mean <= 0.0) return k0;
    // P(k) for k >= k0, normalized by P(X >= k0).
    double term = std::exp(-mean);
    double mass = 1.0;
    for (std::uint64_t k = 1; k <= k0; ++k) term *= mean / static_cast<double>(k);
    if (k0 > 0) mass = -std::expm1(-mean);
    double u = uniform() * mass;
    std::uint64_t k = k0;
    double cdf = term;
    const double k_max = mean + 40.0 * std::sqrt(mean) + 64.0;
    while (u >= cdf && static_cast<double>(k) < k_max) {
      ++k;
      term *= mean / static_cast<double>(k);
      cdf += term;
    }
    return k;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hsps::rng
