#pragma once

// Counter-based Gaussian stream: the n-th draw of stream s under key k is a
// pure function of (k, s, n), so weights do not depend on generation order.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace layertime::detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class CounterGaussian {
 public:
  CounterGaussian(std::uint64_t key, std::uint64_t stream)
      : base_(splitmix64(key ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

  // Uniform on (0, 1), never exactly 0.
  double uniform(std::uint64_t counter) const {
    const std::uint64_t bits = splitmix64(base_ + splitmix64(counter));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t base_;
};

}  // namespace layertime::detail
