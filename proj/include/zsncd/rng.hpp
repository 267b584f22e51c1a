#pragma once

#include <cstdint>
#include <limits>

namespace zsncd {

/// Counter-based generator: output n is a SplitMix64 hash of
/// (seed, stream, n). Streams give independent sequences for per-trial or
/// per-thread use without sharing state, so results never depend on how
/// work is scheduled.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next(); }
  result_type next() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; caches the second variate.
  double normal() noexcept;
  /// Poisson(mean): Knuth's multiplication method below 30, PTRS above.
  long poisson(double mean);

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace zsncd
