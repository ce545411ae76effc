#pragma once

// Counter-based random numbers (Philox4x32-10, Salmon et al. SC 2011).
// Every draw is a pure function of (key, counter), so increments can be
// addressed by logical coordinates and filled in any order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace mvsde {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

}  // namespace detail

constexpr PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0 = 0, hi0 = 0, lo1 = 0, hi1 = 0;
    detail::mulhilo(detail::kPhiloxM0, ctr[0], lo0, hi0);
    detail::mulhilo(detail::kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

constexpr PhiloxKey key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Open interval (0,1) with 52 random bits; the half-ulp offset stays exact.
inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

// Two independent standard normals from one Philox block (Box-Muller).
inline std::pair<double, double> normal_pair(const PhiloxCounter& ctr, const PhiloxKey& key) {
  const PhiloxCounter r = philox4x32(ctr, key);
  const double u1 = to_unit_open(r[0], r[1]);
  const double u2 = to_unit_open(r[2], r[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Stream tags keep the noise families in disjoint counter space.
enum class StreamTag : std::uint32_t {
  Idiosyncratic = 0,
  Common = 1,
  InitialState = 2,
  BridgeIdiosyncratic = 3,
  BridgeCommon = 4,
  Sampling = 5,
};

/// Sequential view onto one logical coordinate (seed, realization, tag,
/// index, lane). Block j of the stream lives at counter
/// {index, j, 2*lane (+1 for uniforms), word3}, so streams with different
/// coordinates never overlap.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint32_t realization, StreamTag tag, std::uint32_t index,
                std::uint32_t lane = 0)
      : key_(key_from_seed(seed)),
        index_(index),
        lane_(lane << 1),
        word3_((realization << 8) | static_cast<std::uint32_t>(tag)) {}

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    auto [z0, z1] = normal_pair({index_, block_++, lane_, word3_}, key_);
    spare_ = z1;
    has_spare_ = true;
    return z0;
  }

  double uniform() {
    const PhiloxCounter r = philox4x32({index_, block_++, lane_ | 1u, word3_}, key_);
    return to_unit_open(r[0], r[1]);
  }

 private:
  PhiloxKey key_;
  std::uint32_t index_;
  std::uint32_t lane_;
  std::uint32_t word3_;
  std::uint32_t block_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mvsde
