#pragma once

#include <array>
#include <cstdint>

namespace oscchain {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Stateless block function.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t prod0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t prod1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(prod0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(prod0);
      const auto hi1 = static_cast<std::uint32_t>(prod1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(prod1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Counter-based random stream keyed by (experiment seed, stream id).
///
/// Two streams with different ids never share a counter block, so replicas
/// can be generated in any order or in parallel and stay bit-reproducible.
/// The block index is the only mutable state; a stream can be repositioned
/// with `seek`.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_{static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    if (lane_ == 2) refill();
    const result_type out = (result_type{buffer_[2 * lane_ + 1]} << 32) | buffer_[2 * lane_];
    ++lane_;
    return out;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a logarithm argument.
  double uniform_pos() noexcept { return 1.0 - uniform(); }

  /// Standard normal variate (Box-Muller, second value cached).
  double normal() noexcept;

  /// Poisson variate conditioned on being at least one.
  unsigned poisson_at_least_one(double mean) noexcept;

  std::uint64_t position() const noexcept { return block_; }
  void seek(std::uint64_t block) noexcept {
    block_ = block;
    lane_ = 2;
    has_spare_ = false;
  }

 private:
  void refill() noexcept {
    buffer_ = Philox4x32::block({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                 stream_[0], stream_[1]},
                                key_);
    ++block_;
    lane_ = 0;
  }

  Philox4x32::Key key_;
  std::array<std::uint32_t, 2> stream_;
  Philox4x32::Counter buffer_{};
  std::uint64_t block_ = 0;
  int lane_ = 2;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace oscchain
