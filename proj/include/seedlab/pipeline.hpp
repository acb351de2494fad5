#ifndef SEEDLAB_PIPELINE_HPP
#define SEEDLAB_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "seedlab/attack.hpp"
#include "seedlab/core.hpp"
#include "seedlab/entropy.hpp"
#include "seedlab/token_model.hpp"
#include "seedlab/watermark.hpp"

namespace seedlab {

/// How much of the provider the entropy-source defense replaces. Under
/// `full_provider` the compromised library (reweighting included) is gone;
/// under `entropy_only` only the uniforms come from the new source.
enum class DefenseScope { full_provider, entropy_only };

inline std::string_view to_string(DefenseScope s) {
  return s == DefenseScope::full_provider ? "full_provider" : "entropy_only";
}

inline DefenseScope parse_defense_scope(std::string_view s) {
  if (s == "full_provider") return DefenseScope::full_provider;
  if (s == "entropy_only") return DefenseScope::entropy_only;
  throw Error("unknown defense scope: " + std::string(s));
}

struct PipelineConfig {
  TokenModelParams model;
  std::size_t n_tokens = 2000;
  double temperature = 0.7;
  std::size_t top_k = 50;
  std::optional<WatermarkConfig> watermark;
  AttackConfig attack;
  EntropyKind entropy = EntropyKind::honest;
  DefenseScope defense_scope = DefenseScope::full_provider;
  std::uint64_t run_seed = 0;
  /// Prompt tokens drawn from the unconditional table by `run_seed`; they
  /// condition generation but are not part of the output.
  std::size_t prompt_length = 1;

  void validate() const {
    if (model.vocab_size < kMinVocabulary) throw Error("vocabulary must hold at least 8 tokens");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw Error("temperature must be positive");
    if (top_k < 1 || top_k > model.vocab_size) throw Error("top_k must lie in [1, |V|]");
    if (n_tokens < 1) throw Error("n_tokens must be at least 1");
    if (watermark) watermark->validate();
    attack.validate(model.vocab_size);
    if (attack.mode == AttackMode::aware && !watermark)
      throw Error("aware mode requires watermark key");
    if (attack.mode != AttackMode::off && entropy == EntropyKind::honest)
      throw Error("attack requires a hijacked or qrng entropy source");
  }
};

struct StepTrace {
  std::uint64_t seed = 0;  ///< watermark step seed (0 when unwatermarked)
  std::uint32_t rank = 0;  ///< 1-based rank of the emitted token under the model
  bool green = false;
  bool target = false;
  bool activated = false;
  double logprob = 0.0;    ///< model log-probability of the emitted token
  double entropy = 0.0;    ///< entropy of the model conditional at this step

  friend bool operator==(const StepTrace&, const StepTrace&) = default;
};

struct SequenceRecord {
  Tokens prompt;
  Tokens tokens;
  std::vector<StepTrace> steps;
  bool has_green = false;
  PipelineConfig config;

  std::size_t size() const noexcept { return tokens.size(); }

  std::size_t green_count() const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const StepTrace& s) { return s.green; }));
  }
  double green_fraction() const {
    return steps.empty() ? 0.0 : static_cast<double>(green_count()) / static_cast<double>(steps.size());
  }
  double target_rate() const {
    if (steps.empty()) return 0.0;
    const auto hits = std::count_if(steps.begin(), steps.end(), [](const StepTrace& s) { return s.target; });
    return static_cast<double>(hits) / static_cast<double>(steps.size());
  }
  std::size_t activations() const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const StepTrace& s) { return s.activated; }));
  }
  std::vector<std::uint32_t> ranks() const {
    std::vector<std::uint32_t> r(steps.size());
    std::transform(steps.begin(), steps.end(), r.begin(), [](const StepTrace& s) { return s.rank; });
    return r;
  }
};

/// Rank of `token` when the vocabulary is ordered by descending probability,
/// ties broken by ascending id.
inline std::uint32_t rank_of(std::span<const double> probs, TokenId token) {
  const double p = probs[token];
  std::uint32_t rank = 1;
  for (std::size_t v = 0; v < probs.size(); ++v)
    if (probs[v] > p || (probs[v] == p && v < token)) ++rank;
  return rank;
}

/// Temperature scaling, top-k truncation, softmax. Ties at the k-th logit are
/// broken by ascending id so exactly k entries survive.
inline Probs temper_and_truncate(std::span<const double> logits, double temperature,
                                 std::size_t top_k) {
  std::vector<double> scaled(logits.size());
  for (std::size_t v = 0; v < logits.size(); ++v) scaled[v] = logits[v] / temperature;
  if (top_k < scaled.size()) {
    std::vector<TokenId> order(scaled.size());
    std::iota(order.begin(), order.end(), TokenId{0});
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_k), order.end(),
                     [&](TokenId a, TokenId b) {
                       return scaled[a] > scaled[b] || (scaled[a] == scaled[b] && a < b);
                     });
    for (std::size_t i = top_k; i < order.size(); ++i)
      scaled[order[i]] = -std::numeric_limits<double>::infinity();
  }
  return softmax(scaled);
}

struct ReplayedStep {
  std::uint64_t seed = 0;
  bool green = false;
};

/// Detector replay: regenerates each step's partition from the key and the
/// emitted prefix.
inline std::vector<ReplayedStep> replay_green(const WatermarkConfig& wm, std::span<const TokenId> prompt,
                                              std::span<const TokenId> tokens, std::size_t vocab_size) {
  Tokens context(prompt.begin(), prompt.end());
  context.insert(context.end(), tokens.begin(), tokens.end());
  const std::span<const TokenId> all(context);
  std::vector<ReplayedStep> out(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto seed = step_seed(wm, all.first(prompt.size() + t));
    out[t] = {seed, green_list(wm, seed, vocab_size).is_green(tokens[t])};
  }
  return out;
}

struct GreenTally {
  std::size_t green = 0;
  std::size_t scored = 0;
};

/// Green and scored counts over distinct (step seed, token) pairs; repeats
/// of a pair are skipped.
inline GreenTally tally_green(const SequenceRecord& record) {
  if (!record.has_green) throw Error("record carries no green flags");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(record.steps.size());
  GreenTally tally;
  for (std::size_t t = 0; t < record.steps.size(); ++t) {
    const auto& s = record.steps[t];
    if (!seen.insert(mix64(s.seed ^ detail::token_word(record.tokens[t]))).second) continue;
    ++tally.scored;
    tally.green += s.green ? 1 : 0;
  }
  return tally;
}

/// Prompt for a run: tokens drawn from the unconditional table on a stream
/// derived from the run seed, independent of every sampling source.
inline Tokens make_prompt(const TokenModel& model, std::uint64_t run_seed, std::size_t length) {
  SplitMix64 rng(mix64(run_seed, 0x9A0F7C0DEULL));
  Tokens prompt;
  for (std::size_t i = 0; i < length; ++i)
    prompt.push_back(inverse_cdf(model.probs(prompt), rng.next_uniform()));
  return prompt;
}

inline double z_score(const SequenceRecord& record, double gamma) {
  const auto tally = tally_green(record);
  return z_from_counts(tally.green, tally.scored, gamma);
}

/// Builds a record for an arbitrary token sequence by scoring it under the
/// model and replaying the watermark key. Generation traces agree with this
/// except for the activation flags.
inline SequenceRecord rescore(const TokenModel& model, Tokens prompt, Tokens tokens,
                              const std::optional<WatermarkConfig>& wm, const TokenSet& targets) {
  SequenceRecord rec;
  rec.prompt = std::move(prompt);
  rec.tokens = std::move(tokens);
  rec.steps.resize(rec.tokens.size());
  rec.has_green = wm.has_value();
  std::vector<ReplayedStep> replay;
  if (wm) replay = replay_green(*wm, rec.prompt, rec.tokens, model.vocab_size());
  Tokens context = rec.prompt;
  context.insert(context.end(), rec.tokens.begin(), rec.tokens.end());
  const std::span<const TokenId> all(context);
  for (std::size_t t = 0; t < rec.tokens.size(); ++t) {
    const auto ctx = all.first(rec.prompt.size() + t);
    const TokenId y = rec.tokens[t];
    if (y >= model.vocab_size()) throw Error("token id out of range");
    auto& s = rec.steps[t];
    s.rank = rank_of(model.probs(ctx), y);
    s.logprob = model.log_probs(ctx)[y];
    s.entropy = model.step_entropy(ctx);
    if (wm) {
      s.seed = replay[t].seed;
      s.green = replay[t].green;
    }
    s.target = targets.contains(y);
  }
  return rec;
}

/// The model-sampling stream. Honest and hijacked providers both seed it
/// from the run, so an attack run and its paired baseline see the same
/// uniforms until the attack changes a token.
inline EntropySource make_entropy_source(const PipelineConfig& config) {
  switch (config.entropy) {
    case EntropyKind::honest: return EntropySource::honest(config.run_seed);
    case EntropyKind::hijacked: return EntropySource::hijacked(config.run_seed);
    case EntropyKind::qrng: return EntropySource::qrng();
  }
  throw Error("unknown entropy kind");
}

/// One full generation loop: model logits, watermark, temperature and
/// top-k, attack, sampling. Bit-reproducible unless the source is qrng.
inline SequenceRecord generate(const TokenModel& model, const PipelineConfig& config) {
  config.validate();
  if (model.vocab_size() != config.model.vocab_size) throw Error("model/config vocabulary mismatch");
  const std::size_t vocab = model.vocab_size();
  EntropySource source = make_entropy_source(config);
  // Attacker stream planted with sigma; drives the activation gate only.
  EntropySource gate = EntropySource::hijacked(config.attack.sigma);
  const bool provider_compromised =
      config.entropy == EntropyKind::hijacked ||
      (config.entropy == EntropyKind::qrng && config.defense_scope == DefenseScope::entropy_only);
  const bool reweighting = provider_compromised &&
      (config.attack.mode == AttackMode::aware || config.attack.mode == AttackMode::blind);

  SequenceRecord rec;
  rec.config = config;
  rec.has_green = config.watermark.has_value();
  rec.prompt = make_prompt(model, config.run_seed, config.prompt_length);
  rec.tokens.reserve(config.n_tokens);
  rec.steps.reserve(config.n_tokens);
  Tokens context = rec.prompt;
  context.reserve(rec.prompt.size() + config.n_tokens);

  for (std::size_t t = 0; t < config.n_tokens; ++t) {
    const std::span<const TokenId> ctx(context);
    const auto model_probs = model.probs(ctx);
    std::vector<double> logits = model.logits(ctx);

    std::optional<GreenPartition> part;
    if (config.watermark) {
      part = green_list(*config.watermark, step_seed(*config.watermark, ctx), vocab);
      logits = apply_bias(*config.watermark, logits, *part);
    }
    Probs probs = temper_and_truncate(logits, config.temperature, config.top_k);
    if (config.watermark && config.watermark->scheme == Scheme::dipmark)
      probs = reweight_dipmark(*config.watermark, probs, part->step_seed);

    StepTrace step;
    TokenId token = 0;
    if (reweighting) {
      auto st = attack_step(config.attack, probs, part ? &*part : nullptr, gate);
      step.activated = st.activated;
      token = multinomial_draw(source, st.probs);
    } else if (config.attack.mode == AttackMode::steering) {
      const auto st = steer_step(config.attack, probs, source, gate);
      step.activated = st.activated;
      token = st.token;
    } else {
      token = multinomial_draw(source, probs);
    }

    step.rank = rank_of(model_probs, token);
    step.logprob = model.log_probs(ctx)[token];
    step.entropy = model.step_entropy(ctx);
    if (part) {
      step.seed = part->step_seed;
      step.green = part->is_green(token);
    }
    step.target = config.attack.targets.contains(token);
    rec.tokens.push_back(token);
    context.push_back(token);
    rec.steps.push_back(step);
  }
  return rec;
}

inline SequenceRecord generate(const PipelineConfig& config) {
  return generate(TokenModel(config.model), config);
}

}  // namespace seedlab

#endif  // SEEDLAB_PIPELINE_HPP
