#ifndef SEEDLAB_ENTROPY_HPP
#define SEEDLAB_ENTROPY_HPP

#include <algorithm>
#include <cerrno>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include <sys/random.h>

#include "seedlab/core.hpp"
#include "seedlab/splitmix.hpp"
#include "seedlab/token_set.hpp"

namespace seedlab {

enum class EntropyKind { honest, hijacked, qrng };

inline std::string_view to_string(EntropyKind kind) {
  switch (kind) {
    case EntropyKind::honest: return "honest";
    case EntropyKind::hijacked: return "hijacked";
    case EntropyKind::qrng: return "qrng";
  }
  return "?";
}

inline EntropyKind parse_entropy_kind(std::string_view s) {
  if (s == "honest") return EntropyKind::honest;
  if (s == "hijacked") return EntropyKind::hijacked;
  if (s == "qrng") return EntropyKind::qrng;
  throw Error("unknown entropy kind: " + std::string(s));
}

/// Anything that hands out uniforms in [0, 1).
template <typename S>
concept UniformSource = requires(S& s) {
  { s.next_uniform() } -> std::convertible_to<double>;
};

/// One randomness supply for a generation loop. Honest and hijacked sources
/// are SplitMix64 streams and replay exactly from their seed; the qrng kind
/// reads the kernel CSPRNG on every draw and cannot be seeded.
class EntropySource {
public:
  static EntropySource honest(std::uint64_t seed) {
    return EntropySource(EntropyKind::honest, seed);
  }
  static EntropySource hijacked(std::uint64_t sigma) {
    return EntropySource(EntropyKind::hijacked, sigma);
  }
  static EntropySource qrng() { return EntropySource(EntropyKind::qrng, 0); }

  EntropyKind kind() const noexcept { return kind_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_bits() {
    if (kind_ != EntropyKind::qrng) return prng_.next();
    std::uint64_t bits = 0;
    auto* out = reinterpret_cast<unsigned char*>(&bits);
    std::size_t filled = 0;
    while (filled < sizeof bits) {
      const ssize_t got = ::getrandom(out + filled, sizeof bits - filled, 0);
      if (got < 0) {
        if (errno == EINTR) continue;
        throw Error("entropy source failure");
      }
      filled += static_cast<std::size_t>(got);
    }
    return bits;
  }

  double next_uniform() { return to_unit(next_bits()); }

private:
  EntropySource(EntropyKind kind, std::uint64_t seed)
      : kind_(kind), seed_(seed), prng_(seed) {}

  EntropyKind kind_;
  std::uint64_t seed_;
  SplitMix64 prng_;
};

/// Smallest index whose running sum exceeds u. Rounding slack at the top
/// falls back to the last index carrying mass.
inline TokenId inverse_cdf(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    cumulative += probs[i];
    if (cumulative > u) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

/// Draws one token; consumes exactly one uniform from the source.
template <UniformSource Source>
TokenId multinomial_draw(Source& source, std::span<const double> probs) {
  require_distribution(probs);
  return inverse_cdf(probs, source.next_uniform());
}

/// The uniform that makes inverse-CDF sampling land on the heaviest target
/// token: the midpoint of that token's CDF interval. Empty when the target
/// set carries no mass.
inline std::optional<double> steer_draw(std::span<const double> probs,
                                        const TokenSet& target) {
  require_distribution(probs);
  double cumulative = 0.0;
  double best_mass = 0.0;
  double best_lo = 0.0;
  double best_hi = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double lo = cumulative;
    cumulative += probs[i];
    if (probs[i] > best_mass && target.contains(static_cast<TokenId>(i))) {
      best_mass = probs[i];
      best_lo = lo;
      best_hi = cumulative;
    }
  }
  if (best_mass <= 0.0) return std::nullopt;
  const double u = best_lo + 0.5 * (best_hi - best_lo);
  return std::min(u, std::nextafter(1.0, 0.0));
}

/// Replays a fixed list of uniforms; for planting draws in tests and oracles.
class PlantedSource {
public:
  explicit PlantedSource(std::vector<double> values) : values_(std::move(values)) {}
  double next_uniform() {
    if (next_ >= values_.size()) throw Error("planted source exhausted");
    return values_[next_++];
  }
  std::size_t consumed() const noexcept { return next_; }

private:
  std::vector<double> values_;
  std::size_t next_ = 0;
};

}  // namespace seedlab

#endif  // SEEDLAB_ENTROPY_HPP
