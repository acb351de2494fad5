#ifndef SEEDLAB_EXPERIMENTS_HPP
#define SEEDLAB_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <cstdio>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "seedlab/attack.hpp"
#include "seedlab/detectors.hpp"
#include "seedlab/pipeline.hpp"
#include "seedlab/stats.hpp"
#include "seedlab/token_model.hpp"
#include "seedlab/token_set.hpp"
#include "seedlab/watermark.hpp"

namespace seedlab {

inline constexpr std::uint64_t kDefaultTargetSeed = 777;

/// Default attacker target set: half the vocabulary, drawn with a fixed seed.
inline TokenSet default_targets(std::size_t vocab_size, std::uint64_t seed = kDefaultTargetSeed) {
  return random_token_set(vocab_size, vocab_size / 2, seed);
}

/// Shared knobs for the experiment programs. `base` carries the model,
/// watermark and attack parameters; each experiment overrides the fields
/// its design varies.
struct ExperimentSettings {
  PipelineConfig base;
  std::size_t replicates = 20;
  std::uint64_t seed = 0;            ///< replicate i uses run_seed = seed + i
  std::size_t reference_size = 32;   ///< detection-matrix reference corpus M
  double edit_rate = 0.15;
  unsigned threads = 0;              ///< 0 picks hardware concurrency

  ExperimentSettings() {
    base.watermark = WatermarkConfig{};
    base.attack.targets = default_targets(base.model.vocab_size);
  }
};

/// One output row. `z` and `green_fraction` are taken over the scored
/// (deduplicated) steps. Detector columns are absent for experiments that do
/// not run the detector suite; survival is absent when undefined.
struct ResultRow {
  std::string condition_id;
  std::optional<WatermarkConfig> watermark;
  AttackConfig attack;
  EntropyKind entropy = EntropyKind::honest;
  std::size_t n_tokens = 0;
  std::uint64_t seed = 0;
  double z = std::numeric_limits<double>::quiet_NaN();
  double green_fraction = 0.0;
  std::size_t scored = 0;  ///< distinct (step seed, token) pairs behind z and green_fraction
  double target_rate = 0.0;
  std::optional<double> survival;
  std::optional<std::array<double, kDetectorCount>> statistics;
  std::optional<int> trigger_count;
};

inline ResultRow make_row(std::string condition_id, const PipelineConfig& cfg, const SequenceRecord& rec) {
  ResultRow row;
  row.condition_id = std::move(condition_id);
  row.watermark = cfg.watermark;
  row.attack = cfg.attack;
  row.entropy = cfg.entropy;
  row.n_tokens = rec.size();
  row.seed = cfg.run_seed;
  if (rec.has_green) {
    const auto tally = tally_green(rec);
    row.z = z_from_counts(tally.green, tally.scored, cfg.watermark->gamma);
    row.green_fraction = static_cast<double>(tally.green) / static_cast<double>(tally.scored);
    row.scored = tally.scored;
  }
  row.target_rate = rec.target_rate();
  return row;
}

/// Runs `fn(i)` for i in [0, n) on a thread pool. Results land at index i,
/// so the output does not depend on scheduling. The first exception thrown
/// by any task is rethrown.
template <typename Fn>
auto parallel_map(std::size_t n, unsigned threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  std::vector<decltype(fn(std::size_t{}))> out(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------
// Detection matrix

struct MatrixSummary {
  std::string condition_id;
  std::size_t replicates = 0;
  std::size_t zero_triggers = 0;
  std::size_t any_trigger = 0;
  double mean_z = 0.0;
  double mean_survival = 0.0;
  double pooled_survival = 0.0;  ///< mean z over the mean held-out baseline z
  std::array<double, kDetectorCount> mean_statistics{};
};

struct MatrixResult {
  std::vector<ResultRow> rows;
  std::vector<MatrixSummary> summary;  ///< aware, blind, token_edit, holdout
  ReferenceStats reference;
};

inline constexpr std::array<std::string_view, 4> kMatrixConditions = {
    "seedhijack_aware", "seedhijack_blind", "token_edit", "baseline_holdout"};

/// Reference corpus of M watermarked baselines, then per replicate a
/// held-out baseline, the aware and blind attacks on the same run seed, and
/// the token-edit baseline applied to the held-out sequence. Survival is
/// taken against the paired held-out baseline.
inline MatrixResult experiment_detection_matrix(const ExperimentSettings& s) {
  if (s.reference_size < 16) throw Error("reference corpus must hold at least 16 sequences");
  if (!s.base.watermark) throw Error("detection matrix requires a watermark");
  const TokenModel model(s.base.model);
  const double gamma = s.base.watermark->gamma;

  PipelineConfig baseline = s.base;
  baseline.attack.mode = AttackMode::off;
  baseline.entropy = EntropyKind::honest;
  const auto reference = parallel_map(s.reference_size, s.threads, [&](std::size_t i) {
    PipelineConfig c = baseline;
    c.run_seed = mix64(s.seed ^ 0xEEF0C0A9E5ULL, i);
    return generate(model, c);
  });
  MatrixResult result;
  result.reference = build_reference(reference);

  auto per_replicate = parallel_map(s.replicates, s.threads, [&](std::size_t i) {
    std::array<ResultRow, 4> rows;
    PipelineConfig held = baseline;
    held.run_seed = s.seed + i;
    const auto base_rec = generate(model, held);
    const double zb = z_score(base_rec, gamma);

    auto finish = [&](std::size_t slot, const PipelineConfig& cfg, const SequenceRecord& rec) {
      ResultRow row = make_row(std::string(kMatrixConditions[slot]), cfg, rec);
      const auto report = run_suite(rec, result.reference, gamma, zb);
      row.statistics = report.statistics;
      row.trigger_count = report.trigger_count;
      if (!std::isnan(report.survival)) row.survival = report.survival;
      rows[slot] = std::move(row);
    };
    for (auto mode : {AttackMode::aware, AttackMode::blind}) {
      PipelineConfig c = held;
      c.entropy = EntropyKind::hijacked;
      c.attack.mode = mode;
      finish(mode == AttackMode::aware ? 0 : 1, c, generate(model, c));
    }
    const auto edited = token_edit_baseline(base_rec.tokens, s.edit_rate, mix64(held.run_seed, 0xED17ULL),
                                            model.vocab_size());
    finish(2, held, rescore(model, base_rec.prompt, edited, held.watermark, held.attack.targets));
    finish(3, held, base_rec);
    return rows;
  });

  result.summary.resize(kMatrixConditions.size());
  for (std::size_t c = 0; c < kMatrixConditions.size(); ++c) {
    auto& sum = result.summary[c];
    sum.condition_id = std::string(kMatrixConditions[c]);
    sum.replicates = per_replicate.size();
    std::size_t with_survival = 0;
    for (const auto& reps : per_replicate) {
      const auto& row = reps[c];
      sum.zero_triggers += *row.trigger_count == 0 ? 1 : 0;
      sum.any_trigger += *row.trigger_count > 0 ? 1 : 0;
      sum.mean_z += row.z;
      if (row.survival) {
        sum.mean_survival += *row.survival;
        ++with_survival;
      }
      for (std::size_t k = 0; k < kDetectorCount; ++k) sum.mean_statistics[k] += (*row.statistics)[k];
    }
    const double n = static_cast<double>(std::max<std::size_t>(sum.replicates, 1));
    sum.mean_z /= n;
    sum.mean_survival = with_survival ? sum.mean_survival / static_cast<double>(with_survival)
                                      : std::numeric_limits<double>::quiet_NaN();
    for (double& m : sum.mean_statistics) m /= n;
  }
  const double pooled_base = result.summary[3].mean_z;
  for (auto& sum : result.summary)
    sum.pooled_survival = pooled_base > 0.0 ? survival(sum.mean_z, pooled_base)
                                            : std::numeric_limits<double>::quiet_NaN();
  for (const auto& reps : per_replicate)
    for (const auto& row : reps) result.rows.push_back(row);
  return result;
}

// ---------------------------------------------------------------------------
// Activation-by-boost sweep

inline constexpr std::array<double, 4> kSweepActivations = {0.3, 0.5, 0.7, 0.9};
inline constexpr std::array<double, 4> kSweepBoosts = {10.0, 30.0, 50.0, 100.0};

struct SweepCell {
  double activation = 0.0;
  double boost = 0.0;
  double mean_z = 0.0;
  double mean_target_rate = 0.0;
  double mean_green_fraction = 0.0;
};

struct SweepResult {
  std::vector<ResultRow> rows;   ///< one per cell and replicate
  std::vector<SweepCell> cells;  ///< activation-major, 16 entries
  std::vector<ResultRow> cell_rows() const;
};

inline std::string sweep_condition_id(double activation, double boost) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "sweep_p%.1f_b%.0f", activation, boost);
  return buf;
}

/// Blind-mode grid over activation rate and boost with a fixed watermark.
inline SweepResult experiment_sweep(const ExperimentSettings& s) {
  const TokenModel model(s.base.model);
  const std::size_t ncell = kSweepActivations.size() * kSweepBoosts.size();
  const auto rows = parallel_map(ncell * s.replicates, s.threads, [&](std::size_t job) {
    const std::size_t cell = job / s.replicates;
    PipelineConfig c = s.base;
    c.entropy = EntropyKind::hijacked;
    c.attack.mode = AttackMode::blind;
    c.attack.activation = kSweepActivations[cell / kSweepBoosts.size()];
    c.attack.boost = kSweepBoosts[cell % kSweepBoosts.size()];
    c.run_seed = s.seed + job % s.replicates;
    return make_row(sweep_condition_id(c.attack.activation, c.attack.boost), c, generate(model, c));
  });
  SweepResult result;
  result.rows = rows;
  for (std::size_t cell = 0; cell < ncell; ++cell) {
    SweepCell sc;
    sc.activation = kSweepActivations[cell / kSweepBoosts.size()];
    sc.boost = kSweepBoosts[cell % kSweepBoosts.size()];
    for (std::size_t r = 0; r < s.replicates; ++r) {
      const auto& row = rows[cell * s.replicates + r];
      sc.mean_z += row.z;
      sc.mean_target_rate += row.target_rate;
      sc.mean_green_fraction += row.green_fraction;
    }
    const double n = static_cast<double>(std::max<std::size_t>(s.replicates, 1));
    sc.mean_z /= n;
    sc.mean_target_rate /= n;
    sc.mean_green_fraction /= n;
    result.cells.push_back(sc);
  }
  return result;
}

/// Per-cell means in row form, for the heatmap table. The seed column holds
/// the first replicate seed of the cell.
inline std::vector<ResultRow> SweepResult::cell_rows() const {
  std::vector<ResultRow> out;
  const std::size_t per_cell = cells.empty() ? 0 : rows.size() / cells.size();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ResultRow row = rows.at(c * per_cell);
    row.z = cells[c].mean_z;
    row.target_rate = cells[c].mean_target_rate;
    row.green_fraction = cells[c].mean_green_fraction;
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Watermark-strength orthogonality

inline constexpr std::array<double, 5> kOrthogonalityDeltas = {0.5, 1.0, 2.0, 4.0, 8.0};

struct OrthogonalityPoint {
  double delta = 0.0;
  double z_base = 0.0;
  double z_attack = 0.0;
  double target_rate = 0.0;
  double z_survival = 0.0;  ///< mean of paired z_attack / z_base
};

struct OrthogonalityResult {
  std::vector<ResultRow> rows;
  std::vector<OrthogonalityPoint> points;
  std::optional<Correlation> correlation;  ///< Pearson r(delta, r_T) over points
  double cv = 0.0;                         ///< CV of r_T over points
};

/// Sweeps the watermark bias with fixed attack parameters. Each replicate
/// pairs an honest baseline with the attack on the same run seed.
inline OrthogonalityResult experiment_orthogonality(const ExperimentSettings& s) {
  if (!s.base.watermark) throw Error("orthogonality experiment requires a watermark");
  const TokenModel model(s.base.model);
  const std::size_t nd = kOrthogonalityDeltas.size();
  const auto pairs = parallel_map(nd * s.replicates, s.threads, [&](std::size_t job) {
    PipelineConfig base = s.base;
    base.watermark->delta = kOrthogonalityDeltas[job / s.replicates];
    base.run_seed = s.seed + job % s.replicates;
    base.attack.mode = AttackMode::off;
    base.entropy = EntropyKind::honest;
    PipelineConfig attack = base;
    attack.attack.mode = s.base.attack.mode == AttackMode::off ? AttackMode::aware : s.base.attack.mode;
    attack.entropy = EntropyKind::hijacked;
    char tag[32];
    std::snprintf(tag, sizeof tag, "delta_%g", base.watermark->delta);
    ResultRow b = make_row(std::string("orth_base_") + tag, base, generate(model, base));
    ResultRow a = make_row(std::string("orth_attack_") + tag, attack, generate(model, attack));
    if (b.z > 0.0) a.survival = survival(a.z, b.z);
    return std::array<ResultRow, 2>{std::move(b), std::move(a)};
  });

  OrthogonalityResult result;
  std::vector<double> deltas, rates;
  for (std::size_t d = 0; d < nd; ++d) {
    OrthogonalityPoint p;
    p.delta = kOrthogonalityDeltas[d];
    std::size_t with_survival = 0;
    for (std::size_t r = 0; r < s.replicates; ++r) {
      const auto& [b, a] = pairs[d * s.replicates + r];
      p.z_base += b.z;
      p.z_attack += a.z;
      p.target_rate += a.target_rate;
      if (a.survival) {
        p.z_survival += *a.survival;
        ++with_survival;
      }
      result.rows.push_back(b);
      result.rows.push_back(a);
    }
    const double n = static_cast<double>(std::max<std::size_t>(s.replicates, 1));
    p.z_base /= n;
    p.z_attack /= n;
    p.target_rate /= n;
    p.z_survival = with_survival ? p.z_survival / static_cast<double>(with_survival)
                                 : std::numeric_limits<double>::quiet_NaN();
    deltas.push_back(p.delta);
    rates.push_back(p.target_rate);
    result.points.push_back(p);
  }
  result.correlation = pearson(deltas, rates);
  result.cv = coefficient_of_variation(rates);
  return result;
}

// ---------------------------------------------------------------------------
// Entropy-source defense

inline constexpr std::array<std::string_view, 3> kDefenseConditions = {"baseline", "hijacked_attack",
                                                                       "qrng_defended"};

struct DefenseSummary {
  std::string condition_id;
  double mean_z = 0.0;
  double sd_z = 0.0;
  double mean_green_fraction = 0.0;
  double mean_target_rate = 0.0;
};

struct DefenseResult {
  std::vector<ResultRow> rows;  ///< replicate-major: baseline, hijacked, qrng
  std::vector<DefenseSummary> summary;
};

/// Baseline, steering attack on a hijacked source, and the same attack once
/// the provider's entropy comes from the OS. The defense scope is taken from
/// `s.base.defense_scope`.
inline DefenseResult experiment_qrng_defense(const ExperimentSettings& s) {
  const TokenModel model(s.base.model);
  const auto triples = parallel_map(s.replicates, s.threads, [&](std::size_t i) {
    PipelineConfig base = s.base;
    base.run_seed = s.seed + i;
    base.attack.mode = AttackMode::off;
    base.entropy = EntropyKind::honest;
    PipelineConfig hijacked = base;
    hijacked.attack.mode = AttackMode::steering;
    hijacked.entropy = EntropyKind::hijacked;
    PipelineConfig defended = hijacked;
    defended.entropy = EntropyKind::qrng;
    return std::array<ResultRow, 3>{make_row(std::string(kDefenseConditions[0]), base, generate(model, base)),
                                    make_row(std::string(kDefenseConditions[1]), hijacked, generate(model, hijacked)),
                                    make_row(std::string(kDefenseConditions[2]), defended, generate(model, defended))};
  });
  DefenseResult result;
  for (const auto& t : triples)
    for (const auto& row : t) result.rows.push_back(row);
  for (std::size_t c = 0; c < kDefenseConditions.size(); ++c) {
    DefenseSummary sum;
    sum.condition_id = std::string(kDefenseConditions[c]);
    std::vector<double> zs, gf, rt;
    for (const auto& t : triples) {
      zs.push_back(t[c].z);
      gf.push_back(t[c].green_fraction);
      rt.push_back(t[c].target_rate);
    }
    if (!zs.empty()) {
      sum.mean_z = mean_of(zs);
      sum.sd_z = stddev_of(zs);
      sum.mean_green_fraction = mean_of(gf);
      sum.mean_target_rate = mean_of(rt);
    }
    result.summary.push_back(sum);
  }
  return result;
}

/// Defense settings: a detection key with zero bias, so the unattacked
/// green fraction sits at gamma, and the steering attack.
inline ExperimentSettings defense_settings(ExperimentSettings s) {
  if (!s.base.watermark) s.base.watermark = WatermarkConfig{};
  s.base.watermark->delta = 0.0;
  s.base.defense_scope = DefenseScope::full_provider;
  return s;
}

}  // namespace seedlab

#endif  // SEEDLAB_EXPERIMENTS_HPP
