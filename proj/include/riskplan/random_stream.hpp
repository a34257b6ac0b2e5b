#pragma once

#include <cstdint>

namespace riskplan {

/// Counter-based random stream: every draw is a pure function of (seed, counter),
/// so any partition of the counter range across workers yields identical samples.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t seed);

  /// Uniform draw in the open interval (0, 1).
  double uniform(std::uint64_t counter) const;

  /// Standard normal draw via Box-Muller. Counters 2m and 2m+1 share one
  /// uniform pair and return its cosine and sine branches.
  double normal(std::uint64_t counter) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
};

}  // namespace riskplan
