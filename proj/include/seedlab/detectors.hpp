#ifndef SEEDLAB_DETECTORS_HPP
#define SEEDLAB_DETECTORS_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "seedlab/core.hpp"
#include "seedlab/pipeline.hpp"
#include "seedlab/watermark.hpp"

namespace seedlab {

inline constexpr std::size_t kDetectorCount = 6;
inline constexpr std::size_t kMinReferenceRecords = 8;
inline constexpr std::size_t kMinReferenceTokens = 100;

/// Detector order used everywhere: rank_ks, kl_div, perplexity_f,
/// entropy_f, repetition, loglik_f.
inline constexpr std::array<std::string_view, kDetectorCount> kDetectorNames = {
    "rank_ks", "kl_div", "perplexity_f", "entropy_f", "repetition", "loglik_f"};

inline constexpr std::array<double, kDetectorCount> kDetectorThresholds = {
    0.15, 0.774, 2.0, 2.0, 0.30, 2.0};

enum class FStat { perplexity, entropy, loglik };

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Mean and sample standard deviation (n - 1 denominator).
inline Moments moments(std::span<const double> xs) {
  if (xs.empty()) return {};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

/// Log2-spaced rank bins: {1}, {2,3}, {4..7}, ... up to the vocabulary size.
inline std::size_t rank_bin_count(std::size_t vocab_size) {
  return static_cast<std::size_t>(std::bit_width(vocab_size));
}

inline std::size_t rank_bin(std::uint32_t rank) {
  return static_cast<std::size_t>(std::bit_width(rank)) - 1;
}

inline std::vector<double> binned_ranks(std::span<const std::uint32_t> ranks, std::size_t bins) {
  std::vector<double> counts(bins, 0.0);
  for (auto r : ranks) counts[std::min(rank_bin(r), bins - 1)] += 1.0;
  return counts;
}

/// Per-sequence scalars the F-ratio detectors standardize.
struct SequenceStats {
  double perplexity = 0.0;
  double mean_entropy = 0.0;
  double mean_loglik = 0.0;
  double repetition = 0.0;
};

inline double repetition(std::span<const TokenId> tokens) {
  if (tokens.size() < 4) throw Error("repetition needs at least 4 tokens");
  std::unordered_set<std::uint64_t> seen;
  const std::size_t total = tokens.size() - 3;
  seen.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < 4; ++j) key = mix64(key ^ detail::token_word(tokens[i + j]));
    seen.insert(key);
  }
  return 1.0 - static_cast<double>(seen.size()) / static_cast<double>(total);
}

inline SequenceStats sequence_stats(const SequenceRecord& rec) {
  if (rec.steps.empty()) throw Error("empty sequence");
  double ll = 0.0, h = 0.0;
  for (const auto& s : rec.steps) {
    ll += s.logprob;
    h += s.entropy;
  }
  const double n = static_cast<double>(rec.steps.size());
  SequenceStats st;
  st.mean_loglik = ll / n;
  st.perplexity = std::exp(-st.mean_loglik);
  st.mean_entropy = h / n;
  st.repetition = repetition(rec.tokens);
  return st;
}

struct ReferenceStats {
  Moments perplexity;
  Moments entropy;
  Moments loglik;
  Moments repetition;
  std::vector<std::uint32_t> pooled_ranks;  ///< sorted ascending
  std::vector<double> rank_bins;            ///< raw counts per log2 bin
  std::size_t corpus_size = 0;

  const Moments& moments_for(FStat s) const {
    switch (s) {
      case FStat::perplexity: return perplexity;
      case FStat::entropy: return entropy;
      case FStat::loglik: return loglik;
    }
    return loglik;
  }
};

inline ReferenceStats build_reference(std::span<const SequenceRecord> records) {
  if (records.size() < kMinReferenceRecords) throw Error("insufficient reference corpus");
  std::size_t vocab = 0;
  std::vector<double> ppl, ent, ll, rep;
  ReferenceStats ref;
  for (const auto& rec : records) {
    if (rec.steps.size() < kMinReferenceTokens) throw Error("reference sequence shorter than 100 tokens");
    const auto st = sequence_stats(rec);
    ppl.push_back(st.perplexity);
    ent.push_back(st.mean_entropy);
    ll.push_back(st.mean_loglik);
    rep.push_back(st.repetition);
    for (const auto& s : rec.steps) ref.pooled_ranks.push_back(s.rank);
    vocab = std::max(vocab, rec.config.model.vocab_size);
  }
  ref.perplexity = moments(ppl);
  ref.entropy = moments(ent);
  ref.loglik = moments(ll);
  ref.repetition = moments(rep);
  for (const Moments* m : {&ref.perplexity, &ref.entropy, &ref.loglik})
    if (!(m->stddev > 0.0)) throw Error("degenerate reference corpus: zero standard deviation");
  std::sort(ref.pooled_ranks.begin(), ref.pooled_ranks.end());
  const auto max_rank = ref.pooled_ranks.back();
  ref.rank_bins = binned_ranks(ref.pooled_ranks,
                               rank_bin_count(std::max<std::size_t>(vocab, max_rank)));
  ref.corpus_size = records.size();
  return ref;
}

/// Two-sample Kolmogorov-Smirnov statistic: sup-norm distance between the
/// empirical CDFs of two integer samples.
inline double ks_statistic(std::vector<std::uint32_t> a, std::span<const std::uint32_t> sorted_b) {
  if (a.empty() || sorted_b.empty()) throw Error("empty rank sample");
  std::sort(a.begin(), a.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(sorted_b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < sorted_b.size()) {
    const auto x = std::min(a[i], sorted_b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < sorted_b.size() && sorted_b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline double rank_ks(const SequenceRecord& candidate, const ReferenceStats& reference) {
  return ks_statistic(candidate.ranks(), reference.pooled_ranks);
}

/// KL(p || q) in nats after add-one smoothing of both count vectors.
inline double smoothed_kl(std::span<const double> p_counts, std::span<const double> q_counts) {
  if (p_counts.size() != q_counts.size() || p_counts.empty()) throw Error("bin count mismatch");
  const double bins = static_cast<double>(p_counts.size());
  double np = bins, nq = bins;
  for (double c : p_counts) np += c;
  for (double c : q_counts) nq += c;
  double kl = 0.0;
  for (std::size_t b = 0; b < p_counts.size(); ++b) {
    const double p = (p_counts[b] + 1.0) / np;
    const double q = (q_counts[b] + 1.0) / nq;
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

inline double kl_div(const SequenceRecord& candidate, const ReferenceStats& reference) {
  if (candidate.steps.empty() || reference.pooled_ranks.empty()) throw Error("empty rank sample");
  const auto ranks = candidate.ranks();
  return smoothed_kl(binned_ranks(ranks, reference.rank_bins.size()), reference.rank_bins);
}

inline double f_ratio(double candidate_value, FStat stat, const ReferenceStats& reference) {
  const auto& m = reference.moments_for(stat);
  if (!(m.stddev > 0.0)) throw Error("zero reference standard deviation");
  return std::abs(candidate_value - m.mean) / m.stddev;
}

struct DetectorReport {
  std::array<double, kDetectorCount> statistics{};
  std::array<double, kDetectorCount> thresholds = kDetectorThresholds;
  std::array<bool, kDetectorCount> triggered{};
  int trigger_count = 0;
  double z = 0.0;
  double survival = std::numeric_limits<double>::quiet_NaN();

  double rank_ks() const { return statistics[0]; }
  double kl_div() const { return statistics[1]; }
  double perplexity_f() const { return statistics[2]; }
  double entropy_f() const { return statistics[3]; }
  double repetition() const { return statistics[4]; }
  double loglik_f() const { return statistics[5]; }
};

/// Evaluates the six detectors in canonical order. A detector fires when its
/// statistic strictly exceeds its threshold. Survival is left NaN when the
/// baseline z is not positive.
inline DetectorReport run_suite(const SequenceRecord& candidate, const ReferenceStats& reference,
                                double gamma, double z_baseline) {
  const auto st = sequence_stats(candidate);
  DetectorReport r;
  r.statistics = {rank_ks(candidate, reference),
                  kl_div(candidate, reference),
                  f_ratio(st.perplexity, FStat::perplexity, reference),
                  f_ratio(st.mean_entropy, FStat::entropy, reference),
                  st.repetition,
                  f_ratio(st.mean_loglik, FStat::loglik, reference)};
  for (std::size_t i = 0; i < kDetectorCount; ++i) {
    r.triggered[i] = r.statistics[i] > r.thresholds[i];
    r.trigger_count += r.triggered[i] ? 1 : 0;
  }
  r.z = z_score(candidate, gamma);
  if (z_baseline > 0.0) r.survival = survival(r.z, z_baseline);
  return r;
}

}  // namespace seedlab

#endif  // SEEDLAB_DETECTORS_HPP
