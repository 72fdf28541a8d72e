#pragma once

// Counter-based random bits: Philox4x32-10. A generator is a pure function
// of (key, stream, block counter), so every Monte Carlo iteration or GCV
// split can own a stream without any shared state, and the draws do not
// depend on which worker runs it.
//
// Philox4x32 satisfies UniformRandomBitGenerator and is meant to feed the
// standard distributions (uniform_real, normal, gamma). Those are
// deterministic for a given standard library; results are reproducible per
// toolchain, not across libstdc++ and libc++.

#include <array>
#include <cstdint>
#include <limits>

namespace etsi {

class Philox4x32 {
public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 4) {
      buffer_ = generate({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(stream_),
                          static_cast<std::uint32_t>(stream_ >> 32)},
                         key_);
      ++block_;
      lane_ = 0;
    }
    return buffer_[lane_++];
  }

  /// Skips n 128-bit blocks.
  void discard_blocks(std::uint64_t n) {
    block_ += n;
    lane_ = 4;
  }

  /// The bare bijection, ten rounds.
  static Block generate(Block ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int lane_ = 4;
};

/// Packs a small tuple into one stream id: the top byte names the consumer
/// so unrelated streams under one seed never collide.
constexpr std::uint64_t stream_id(std::uint8_t domain, std::uint64_t index,
                                  std::uint32_t attempt = 0) {
  return (std::uint64_t{domain} << 56) | ((index & 0xFFFFFFFFFFull) << 16) | (attempt & 0xFFFFu);
}

namespace stream_domain {
inline constexpr std::uint8_t study_a = 0;
inline constexpr std::uint8_t study_b = 1;
inline constexpr std::uint8_t gcv = 2;
inline constexpr std::uint8_t generate = 3;
}  // namespace stream_domain

}  // namespace etsi
