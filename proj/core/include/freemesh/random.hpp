#pragma once

#include <array>
#include <cstdint>

namespace freemesh {

// xoshiro256** seeded through splitmix64, as published by Blackman & Vigna.
// Doubles are (next() >> 11) * 2^-53, uniform on [0, 1).
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

 private:
  std::array<std::uint64_t, 4> s_;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace freemesh
