#pragma once

// Counter-based random numbers for reproducible simulation.
//
// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3")
// keyed by a 64-bit seed. The output stream is a pure function of
// (seed, counter) and uses only 32-bit integer arithmetic, so trajectories are
// bit-identical on every conforming platform. Gaussian deviates come from the
// Box-Muller transform on 53-bit uniforms; std::normal_distribution is not
// used because its algorithm is implementation-defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace lgc {

class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed = 0)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    if (index_ == 4) {
      block_ = generate(counter_, key_);
      increment();
      index_ = 0;
    }
    return block_[index_++];
  }

  /// Skip `blocks` 128-bit output blocks without generating them.
  void discard_blocks(std::uint64_t blocks) {
    const std::uint64_t lo =
        (static_cast<std::uint64_t>(counter_[1]) << 32) | counter_[0];
    const std::uint64_t sum = lo + blocks;
    if (sum < lo) carry_high();
    counter_[0] = static_cast<std::uint32_t>(sum);
    counter_[1] = static_cast<std::uint32_t>(sum >> 32);
    index_ = 4;
  }

  /// The raw ten-round bijection; exposed for known-answer tests.
  static Block generate(Block ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  void increment() {
    if (++counter_[0] != 0) return;
    if (++counter_[1] != 0) return;
    carry_high();
  }
  void carry_high() {
    if (++counter_[2] != 0) return;
    ++counter_[3];
  }

  std::array<std::uint32_t, 2> key_;
  Block counter_{0, 0, 0, 0};
  Block block_{};
  int index_ = 4;
};

/// Uniform doubles and standard normals drawn from a Philox stream.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() {
    const std::uint64_t hi = engine_() >> 5;  // 27 bits
    const std::uint64_t lo = engine_() >> 6;  // 26 bits
    const std::uint64_t bits = (hi << 26) | lo;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Philox4x32& engine() { return engine_; }

 private:
  Philox4x32 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lgc
