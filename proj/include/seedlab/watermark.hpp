#ifndef SEEDLAB_WATERMARK_HPP
#define SEEDLAB_WATERMARK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "seedlab/core.hpp"
#include "seedlab/splitmix.hpp"

namespace seedlab {

enum class Scheme { kgw, unigram, dipmark };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kgw: return "KGW";
    case Scheme::unigram: return "Unigram";
    case Scheme::dipmark: return "DipMark";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "KGW" || s == "kgw") return Scheme::kgw;
  if (s == "Unigram" || s == "unigram") return Scheme::unigram;
  if (s == "DipMark" || s == "dipmark") return Scheme::dipmark;
  throw Error("unknown watermark scheme: " + std::string(s));
}

struct WatermarkConfig {
  Scheme scheme = Scheme::kgw;
  double gamma = 0.5;
  double delta = 2.0;
  std::uint64_t key = 0x5EC2E7C0DE15BADULL;
  std::size_t context_width = 1;
  double alpha = 0.45;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must lie in (0, 1)");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error("delta must be non-negative");
    if (!(alpha > 0.0 && alpha <= 0.5)) throw Error("alpha must lie in (0, 0.5]");
    if (context_width < 1) throw Error("context_width must be at least 1");
  }
};

struct GreenPartition {
  std::vector<char> membership;
  std::uint64_t step_seed = 0;

  bool is_green(TokenId v) const { return v < membership.size() && membership[v] != 0; }
  std::size_t green_count() const {
    return static_cast<std::size_t>(std::count(membership.begin(), membership.end(), 1));
  }
};

namespace detail {
inline std::uint64_t token_word(TokenId v) noexcept { return mix64(v + kGoldenGamma); }
}  // namespace detail

/// Per-step seed s_t. Unigram is context-free; the other schemes fold the
/// key and then the last `context_width` context tokens through the mixer.
inline std::uint64_t step_seed(const WatermarkConfig& config,
                               std::span<const TokenId> context) {
  std::uint64_t h = mix64(config.key ^ 0xA5A5D1CE0F5EED00ULL);
  if (config.scheme == Scheme::unigram) return h;
  const std::size_t width = std::min(config.context_width, context.size());
  for (std::size_t i = context.size() - width; i < context.size(); ++i)
    h = mix64(h ^ detail::token_word(context[i]));
  return h;
}

/// Unsigned threshold with P(hash < threshold) = gamma for a uniform hash.
inline std::uint64_t green_threshold(double gamma) {
  const double scaled = std::ldexp(gamma, 64);
  if (scaled >= 0x1.0p64) return ~0ULL;
  if (scaled <= 0.0) return 0;
  return static_cast<std::uint64_t>(scaled);
}

/// The keyed order in which DipMark lays out the vocabulary; position i
/// holds a token id.
inline std::vector<TokenId> dipmark_permutation(std::uint64_t seed, std::size_t vocab_size) {
  std::vector<TokenId> perm(vocab_size);
  std::iota(perm.begin(), perm.end(), TokenId{0});
  SplitMix64 rng(seed);
  for (std::size_t i = vocab_size; i-- > 1;) std::swap(perm[i], perm[rng.next_below(i + 1)]);
  return perm;
}

inline GreenPartition green_list(const WatermarkConfig& config, std::uint64_t seed,
                                 std::size_t vocab_size) {
  GreenPartition part{std::vector<char>(vocab_size, 0), seed};
  if (config.scheme == Scheme::dipmark) {
    const auto perm = dipmark_permutation(seed, vocab_size);
    const auto green = static_cast<std::size_t>(
        std::ceil(config.gamma * static_cast<double>(vocab_size)));
    for (std::size_t i = vocab_size - std::min(green, vocab_size); i < vocab_size; ++i)
      part.membership[perm[i]] = 1;
    return part;
  }
  const std::uint64_t threshold = green_threshold(config.gamma);
  const std::uint64_t keyed = seed ^ mix64(config.key);
  for (std::size_t v = 0; v < vocab_size; ++v)
    part.membership[v] = mix64(keyed ^ detail::token_word(static_cast<TokenId>(v))) < threshold;
  return part;
}

/// Adds delta to every green logit (KGW, Unigram). DipMark acts in
/// probability space instead, so its logits pass through untouched.
inline std::vector<double> apply_bias(const WatermarkConfig& config,
                                      std::span<const double> logits,
                                      const GreenPartition& partition) {
  if (logits.size() != partition.membership.size())
    throw Error("logit/partition length mismatch");
  std::vector<double> out(logits.begin(), logits.end());
  if (config.scheme == Scheme::dipmark) return out;
  for (std::size_t v = 0; v < out.size(); ++v)
    if (partition.membership[v]) out[v] += config.delta;
  return out;
}

/// Distortion-preserving reweight over an explicit order: with F the
/// cumulative mass along `order`, the mass in [0, alpha) is removed and the
/// mass above 1 - alpha is doubled.
inline Probs reweight_dipmark_ordered(std::span<const double> probs, std::span<const TokenId> order,
                                      double alpha) {
  require_distribution(probs);
  if (order.size() != probs.size()) throw Error("permutation length mismatch");
  auto hinge = [](double f, double cut) { return std::max(f - cut, 0.0); };
  Probs out(probs.size(), 0.0);
  double prev = 0.0;
  for (TokenId v : order) {
    const double cur = prev + probs[v];
    out[v] = (hinge(cur, alpha) - hinge(prev, alpha)) + (hinge(cur, 1.0 - alpha) - hinge(prev, 1.0 - alpha));
    prev = cur;
  }
  return out;
}

inline Probs reweight_dipmark(const WatermarkConfig& config, std::span<const double> probs,
                              std::uint64_t seed) {
  return reweight_dipmark_ordered(probs, dipmark_permutation(seed, probs.size()), config.alpha);
}

/// One-sided green-count z statistic, normal approximation without
/// continuity correction.
inline double z_from_counts(std::size_t green, std::size_t total, double gamma) {
  if (total == 0) throw Error("z-score needs at least one token");
  const double n = static_cast<double>(total);
  return (static_cast<double>(green) - gamma * n) / std::sqrt(n * gamma * (1.0 - gamma));
}

inline double survival(double z_attack, double z_baseline) {
  if (!(z_baseline > 0.0)) throw Error("undefined survival");
  return z_attack / z_baseline;
}

}  // namespace seedlab

#endif  // SEEDLAB_WATERMARK_HPP
