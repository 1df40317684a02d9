#pragma once

#include <cstdint>
#include <limits>

namespace pwmd {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Key for replication `stream` under a user seed. Pure function of both, so a
// replication draws the same numbers no matter which thread runs it.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed + kGolden) + (stream + 1) * 0x632BE59BD9B4E019ULL);
}

/// Counter-based generator: the i-th output is mix64(key + (i+1)·golden),
/// i.e. SplitMix64 started at `key`. Satisfies UniformRandomBitGenerator so the
/// standard distributions can consume it.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : state_(key) {}
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : state_(stream_key(seed, stream)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return mix64(state_ += kGolden); }

  // Uniform on (0, 1), never exactly 0 or 1.
  constexpr double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Integer in [0, k) by multiply-high; bias is below 2^-64·k.
  constexpr std::uint64_t below(std::uint64_t k) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * k) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace pwmd
