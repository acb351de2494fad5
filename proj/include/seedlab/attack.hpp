#ifndef SEEDLAB_ATTACK_HPP
#define SEEDLAB_ATTACK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

#include "seedlab/core.hpp"
#include "seedlab/entropy.hpp"
#include "seedlab/token_set.hpp"
#include "seedlab/watermark.hpp"

namespace seedlab {

enum class AttackMode { off, aware, blind, steering };

inline std::string_view to_string(AttackMode m) {
  switch (m) {
    case AttackMode::off: return "off";
    case AttackMode::aware: return "aware";
    case AttackMode::blind: return "blind";
    case AttackMode::steering: return "steering";
  }
  return "?";
}

inline AttackMode parse_attack_mode(std::string_view s) {
  if (s == "off") return AttackMode::off;
  if (s == "aware") return AttackMode::aware;
  if (s == "blind") return AttackMode::blind;
  if (s == "steering") return AttackMode::steering;
  throw Error("unknown attack mode: " + std::string(s));
}

struct AttackConfig {
  TokenSet targets;
  double boost = 10.0;
  double activation = 0.3;
  double floor = 1e-4;
  std::uint64_t sigma = 42;
  AttackMode mode = AttackMode::off;

  void validate(std::size_t vocab_size) const {
    if (!(boost >= 1.0) || !std::isfinite(boost)) throw Error("boost must be >= 1");
    if (!(activation >= 0.0 && activation <= 1.0)) throw Error("activation must lie in [0, 1]");
    if (!(floor >= 0.0 && floor < 1.0)) throw Error("floor must lie in [0, 1)");
    if (!targets.empty() && targets.ids().back() >= vocab_size)
      throw Error("target token outside vocabulary");
    if (mode != AttackMode::off && targets.empty()) throw Error("attack requires a target set");
  }
};

/// Multiplicative reweighting: target entries scaled by `boost`, then the
/// whole vector renormalized.
inline Probs reweight(std::span<const double> probs, const TokenSet& targets, double boost) {
  require_distribution(probs);
  if (!(boost >= 1.0)) throw Error("boost must be >= 1");
  Probs out(probs.begin(), probs.end());
  if (targets.empty() || boost == 1.0) return out;
  double total = 0.0;
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (targets.contains(static_cast<TokenId>(v))) out[v] *= boost;
    total += out[v];
  }
  for (double& p : out) p /= total;
  return out;
}

/// Aware mode boosts only targets that are green this step; the other modes
/// boost the whole target set.
inline TokenSet effective_targets(const AttackConfig& config, const GreenPartition* partition) {
  if (config.mode != AttackMode::aware) return config.targets;
  if (partition == nullptr) throw Error("aware mode requires green list");
  std::vector<TokenId> kept;
  for (TokenId v : config.targets)
    if (partition->is_green(v)) kept.push_back(v);
  return TokenSet(std::move(kept));
}

inline double max_mass(std::span<const double> probs, const TokenSet& set) {
  double best = -1.0;
  for (TokenId v : set)
    if (v < probs.size()) best = std::max(best, probs[v]);
  return best;
}

struct AttackStep {
  Probs probs;
  bool activated = false;
};

/// Activation gate plus reweight. Draws exactly one uniform from `gate`
/// whenever the attack is on.
template <UniformSource Source>
AttackStep attack_step(const AttackConfig& config, std::span<const double> probs,
                       const GreenPartition* partition, Source& gate) {
  require_distribution(probs);
  if (config.mode == AttackMode::off) return {Probs(probs.begin(), probs.end()), false};
  const TokenSet eff = effective_targets(config, partition);
  const double u = gate.next_uniform();
  const bool fire = u < config.activation && !eff.empty() && max_mass(probs, eff) >= config.floor;
  if (!fire) return {Probs(probs.begin(), probs.end()), false};
  return {reweight(probs, eff, config.boost), true};
}

struct SteerResult {
  TokenId token = 0;
  bool activated = false;
};

/// u-steering: when the gate (drawn from `gate`) fires and the sampling
/// source is hijacked, the sampling uniform is replaced by one that lands
/// inside the target set. Any other source kind leaves the draw uncontrolled.
template <UniformSource Gate>
SteerResult steer_step(const AttackConfig& config, std::span<const double> probs,
                       EntropySource& source, Gate& gate) {
  require_distribution(probs);
  if (config.mode != AttackMode::steering || source.kind() != EntropyKind::hijacked)
    return {multinomial_draw(source, probs), false};
  const double u = gate.next_uniform();
  if (u < config.activation && max_mass(probs, config.targets) >= config.floor) {
    if (auto steered = steer_draw(probs, config.targets))
      return {inverse_cdf(probs, *steered), true};
  }
  return {multinomial_draw(source, probs), false};
}

/// Single-stream form: gate and sampling share `source`.
inline SteerResult steer_step(const AttackConfig& config, std::span<const double> probs,
                              EntropySource& source) {
  return steer_step(config, probs, source, source);
}

/// Output-layer baseline: each position independently replaced by a uniform
/// vocabulary token with probability `rate`.
inline Tokens token_edit_baseline(std::span<const TokenId> tokens, double rate,
                                  std::uint64_t edit_seed, std::size_t vocab_size) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error("edit rate must lie in [0, 1]");
  SplitMix64 rng(edit_seed);
  Tokens out(tokens.begin(), tokens.end());
  for (TokenId& t : out) {
    const bool edit = rng.next_uniform() < rate;
    const auto replacement = static_cast<TokenId>(rng.next_below(vocab_size));
    if (edit) t = replacement;
  }
  return out;
}

}  // namespace seedlab

#endif  // SEEDLAB_ATTACK_HPP
