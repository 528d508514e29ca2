#pragma once

// Philox4x64-10 counter-based generator (Salmon et al., SC'11).

#include <array>
#include <cstdint>

namespace cellfit::detail {

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const std::uint64_t a_lo = a & 0xFFFFFFFFULL;
  const std::uint64_t a_hi = a >> 32;
  const std::uint64_t b_lo = b & 0xFFFFFFFFULL;
  const std::uint64_t b_hi = b >> 32;
  const std::uint64_t ll = a_lo * b_lo;
  const std::uint64_t lh = a_lo * b_hi;
  const std::uint64_t hl = a_hi * b_lo;
  const std::uint64_t hh = a_hi * b_hi;
  const std::uint64_t mid = (ll >> 32) + (lh & 0xFFFFFFFFULL) + (hl & 0xFFFFFFFFULL);
  lo = a * b;
  hi = hh + (lh >> 32) + (hl >> 32) + (mid >> 32);
}

inline PhiloxCounter philox4x64_10(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t m1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t w1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo64(m0, ctr[0], hi0, lo0);
    mulhilo64(m1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += w0;
    key[1] += w1;
  }
  return ctr;
}

}  // namespace cellfit::detail
