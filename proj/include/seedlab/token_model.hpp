#ifndef SEEDLAB_TOKEN_MODEL_HPP
#define SEEDLAB_TOKEN_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "seedlab/core.hpp"
#include "seedlab/splitmix.hpp"

namespace seedlab {

inline constexpr std::size_t kMinVocabulary = 8;
inline constexpr std::size_t kMaxContextClasses = 4096;

struct TokenModelParams {
  std::size_t vocab_size = 512;
  std::size_t order = 2;
  std::uint64_t seed = 0;
  /// Exponent applied to each Exp(1) draw before normalizing; 0 gives
  /// uniform tables, larger values give steeper rank-frequency curves.
  double concentration = 4.0;
  /// Contiguous vocabulary blocks. A context's table favours the block of
  /// its last token, so sequences dwell in one topic.
  std::size_t topics = 2;
  /// Topic r uses concentration * (1 + contrast * (2r/(topics-1) - 1)).
  double topic_contrast = 0.1;
  /// Weight multiplier for tokens outside the context's topic.
  double topic_leak = 1e-12;
};

struct SequenceScore {
  double mean_loglik = 0.0;
  double perplexity = 0.0;
  double mean_step_entropy = 0.0;
};

/// Deterministic n-gram surrogate for an autoregressive model. Contexts are
/// hashed onto a fixed number of classes, each owning one conditional
/// distribution over the vocabulary. Immutable after construction.
class TokenModel {
public:
  explicit TokenModel(const TokenModelParams& params)
      : vocab_(params.vocab_size), order_(params.order), seed_(params.seed) {
    validate_shape(vocab_, order_);
    if (!(params.concentration >= 0.0)) throw Error("concentration must be non-negative");
    if (params.topics < 1 || params.topics > vocab_ / 2) throw Error("topics must lie in [1, |V|/2]");
    if (!(params.topic_leak > 0.0 && params.topic_leak <= 1.0)) throw Error("topic_leak must lie in (0, 1]");
    if (!(params.topic_contrast >= 0.0 && params.topic_contrast < 1.0))
      throw Error("topic_contrast must lie in [0, 1)");
    topics_ = order_ <= 1 ? 1 : params.topics;
    const std::size_t base = class_count_for(vocab_, order_);
    per_topic_ = base / topics_;
    classes_ = per_topic_ * topics_;
    if (order_ > 1 && per_topic_ == 0) throw Error("more topics than context classes");
    probs_.resize((classes_ + 1) * vocab_);
    for (std::size_t table = 0; table <= classes_; ++table) {
      const bool unconditional = table == 0;
      const std::size_t topic = unconditional ? 0 : (table - 1) / per_topic_;
      double kappa = params.concentration;
      if (!unconditional && topics_ > 1)
        kappa *= 1.0 + params.topic_contrast *
                           (2.0 * static_cast<double>(topic) / static_cast<double>(topics_ - 1) - 1.0);
      SplitMix64 rng(mix64(seed_, unconditional ? ~0ULL : table - 1));
      auto row = mutable_row(table);
      for (std::size_t v = 0; v < vocab_; ++v) {
        // Offset by half an ulp so the exponential draw is strictly positive.
        const double u = (static_cast<double>(rng.next() >> 11) + 0.5) * 0x1.0p-53;
        row[v] = std::pow(-std::log(u), kappa);
        if (!unconditional && topic_of(static_cast<TokenId>(v)) != topic) row[v] *= params.topic_leak;
      }
      if (unconditional) {
        // Equal mass per topic so a fresh sequence picks its topic fairly.
        for (std::size_t r = 0; r < topics_; ++r) {
          double block = 0.0;
          for (std::size_t v = 0; v < vocab_; ++v)
            if (topic_of(static_cast<TokenId>(v)) == r) block += row[v];
          for (std::size_t v = 0; v < vocab_; ++v)
            if (topic_of(static_cast<TokenId>(v)) == r) row[v] /= block * static_cast<double>(topics_);
        }
      } else {
        double total = 0.0;
        for (double w : row) total += w;
        for (double& w : row) w /= total;
      }
    }
    finish();
  }

  /// Builds a model from explicit tables: `unconditional` plus one row per
  /// context class. Rows must be strictly positive distributions.
  static TokenModel from_tables(std::size_t order, Probs unconditional,
                                const std::vector<Probs>& classes,
                                std::uint64_t seed = 0) {
    TokenModel m;
    m.vocab_ = unconditional.size();
    m.order_ = order;
    m.seed_ = seed;
    validate_shape(m.vocab_, m.order_);
    m.classes_ = order <= 1 ? 0 : classes.size();
    m.per_topic_ = m.classes_;
    if (order > 1 && classes.empty()) throw Error("conditional tables required for order > 1");
    m.probs_ = std::move(unconditional);
    for (const auto& row : classes) {
      if (row.size() != m.vocab_) throw Error("table width mismatch");
      m.probs_.insert(m.probs_.end(), row.begin(), row.end());
    }
    for (std::size_t t = 0; t <= m.classes_; ++t) {
      auto row = m.row(t);
      require_distribution(row);
      if (std::any_of(row.begin(), row.end(), [](double p) { return p <= 0.0; }))
        throw Error("table entries must be positive");
    }
    m.finish();
    return m;
  }

  std::size_t vocab_size() const noexcept { return vocab_; }
  std::size_t order() const noexcept { return order_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t class_count() const noexcept { return classes_; }
  std::size_t topics() const noexcept { return topics_; }

  std::size_t topic_of(TokenId v) const noexcept {
    return static_cast<std::size_t>(v) * topics_ / vocab_;
  }

  /// Table index for a context: 0 is the unconditional table, used for an
  /// empty context and for order-1 models.
  std::size_t table_index(std::span<const TokenId> context) const noexcept {
    if (classes_ == 0 || context.empty()) return 0;
    const std::size_t width = std::min(order_ - 1, context.size());
    std::uint64_t h = mix64(seed_ ^ 0x5EED1AB5C0FFEE11ULL);
    for (std::size_t i = context.size() - width; i < context.size(); ++i)
      h = mix64(h, context[i]);
    return 1 + topic_of(context.back()) * per_topic_ + static_cast<std::size_t>(h % per_topic_);
  }

  std::span<const double> probs(std::span<const TokenId> context) const noexcept {
    return row(table_index(context));
  }

  std::span<const double> log_probs(std::span<const TokenId> context) const noexcept {
    const auto t = table_index(context);
    return {log_probs_.data() + t * vocab_, vocab_};
  }

  /// Exact log-probabilities of the context's conditional table.
  std::vector<double> logits(std::span<const TokenId> context) const {
    const auto lp = log_probs(context);
    return {lp.begin(), lp.end()};
  }

  double step_entropy(std::span<const TokenId> context) const noexcept {
    return entropies_[table_index(context)];
  }

  SequenceScore score(std::span<const TokenId> tokens) const {
    if (tokens.empty()) throw Error("empty sequence");
    double loglik = 0.0;
    double entropy = 0.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (tokens[t] >= vocab_) throw Error("token id out of range");
      const auto ctx = tokens.first(t);
      loglik += log_probs(ctx)[tokens[t]];
      entropy += step_entropy(ctx);
    }
    const double n = static_cast<double>(tokens.size());
    SequenceScore s;
    s.mean_loglik = loglik / n;
    s.perplexity = std::exp(-s.mean_loglik);
    s.mean_step_entropy = entropy / n;
    return s;
  }

private:
  TokenModel() = default;

  static void validate_shape(std::size_t vocab, std::size_t order) {
    if (vocab < kMinVocabulary) throw Error("vocabulary must hold at least 8 tokens");
    if (order < 1) throw Error("model order must be at least 1");
  }

  static std::size_t class_count_for(std::size_t vocab, std::size_t order) {
    if (order <= 1) return 0;
    std::size_t k = 1;
    for (std::size_t i = 0; i + 1 < order && k < kMaxContextClasses; ++i) k *= vocab;
    return std::min(k, kMaxContextClasses);
  }

  std::span<const double> row(std::size_t table) const noexcept {
    return {probs_.data() + table * vocab_, vocab_};
  }
  std::span<double> mutable_row(std::size_t table) noexcept {
    return {probs_.data() + table * vocab_, vocab_};
  }

  void finish() {
    log_probs_.resize(probs_.size());
    std::transform(probs_.begin(), probs_.end(), log_probs_.begin(),
                   [](double p) { return std::log(p); });
    entropies_.resize(classes_ + 1);
    for (std::size_t t = 0; t <= classes_; ++t) entropies_[t] = entropy_nats(row(t));
  }

  std::size_t vocab_ = 0;
  std::size_t order_ = 1;
  std::uint64_t seed_ = 0;
  std::size_t classes_ = 0;
  std::size_t topics_ = 1;
  std::size_t per_topic_ = 0;
  std::vector<double> probs_;
  std::vector<double> log_probs_;
  std::vector<double> entropies_;
};

}  // namespace seedlab

#endif  // SEEDLAB_TOKEN_MODEL_HPP
