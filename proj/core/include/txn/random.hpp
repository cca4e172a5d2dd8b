#pragma once

#include <cstdint>
#include <random>

namespace txn {

/// Seeded generator with platform-independent uniform and normal draws.
///
/// std::mt19937_64 has a standardized output sequence; the distribution
/// transforms are implemented here because the standard library ones are
/// not bitwise portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [0, 1) with 24 random bits; exactly representable in float.
  float uniform_float();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace txn
