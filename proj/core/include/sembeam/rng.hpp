#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sembeam {

/// Seeded random source with distribution mappings implemented in-library so
/// that streams are identical across standard library implementations.
/// The engine (std::mt19937_64) has a standard-specified output sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_mix_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection-free modulo of a 53-bit draw; bias
  /// is negligible for the small n used here but we reject to keep it exact.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  /// Standard normal via Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Poisson sample, Knuth's method. Intended for small lambda.
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  /// Derives an independent child stream; used to give simulation substeps
  /// order-independent randomness.
  Rng fork(std::uint64_t salt) const {
    std::uint64_t s = seed_mix_ ^ (salt * 0x9e3779b97f4a7c15ull);
    s ^= s >> 30;
    s *= 0xbf58476d1ce4e5b9ull;
    s ^= s >> 27;
    s *= 0x94d049bb133111ebull;
    s ^= s >> 31;
    return Rng(s);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_mix_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sembeam
