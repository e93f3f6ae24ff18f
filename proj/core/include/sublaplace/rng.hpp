#pragma once

#include <cstdint>
#include <string_view>

namespace sublaplace {

// Counter-based generator: the n-th draw is a pure function of (key, n), so
// streams are reproducible across platforms and can be split by deriving
// new keys instead of sharing state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (uses two uniforms per draw; no caching).
  double normal();
  /// Uniform integer in [0, n) via rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);

/// Key derivation: every stage draws from derive_seed(run_seed, "<stage>")
/// so that adding a stage never perturbs the others.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace sublaplace
