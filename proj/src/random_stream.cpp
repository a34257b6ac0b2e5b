#include "riskplan/random_stream.hpp"

#include <cmath>
#include <numbers>

namespace riskplan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

CounterStream::CounterStream(std::uint64_t seed) : seed_(seed), key_(splitmix64(seed ^ 0x5DEECE66DULL)) {}

double CounterStream::uniform(std::uint64_t counter) const {
  const std::uint64_t bits = splitmix64(splitmix64(counter ^ key_) + key_);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double CounterStream::normal(std::uint64_t counter) const {
  const std::uint64_t pair = counter >> 1;
  const double u1 = uniform(2 * pair);
  const double u2 = uniform(2 * pair + 1);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (counter & 1U) ? radius * std::sin(angle) : radius * std::cos(angle);
}

}  // namespace riskplan
