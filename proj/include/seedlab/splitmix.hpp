#ifndef SEEDLAB_SPLITMIX_HPP
#define SEEDLAB_SPLITMIX_HPP

#include <cstdint>

namespace seedlab {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Order-sensitive combination of two 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(mix64(a + kGoldenGamma) ^ b);
}

/// Top 53 bits scaled into [0, 1); exact dyadic rationals.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class SplitMix64 {
public:
  constexpr explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  constexpr double next_uniform() noexcept { return to_unit(next()); }

  /// Uniform index in [0, bound) by multiply-high; bound must be positive.
  constexpr std::uint64_t next_below(std::uint64_t bound) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next()) * bound) >> 64);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

private:
  std::uint64_t state_;
};

}  // namespace seedlab

#endif  // SEEDLAB_SPLITMIX_HPP
