#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "seedlab/seedlab.hpp"

using namespace seedlab;

namespace {

ExperimentSettings tiny_settings() {
  ExperimentSettings s;
  s.base.n_tokens = 150;
  s.replicates = 2;
  s.threads = 2;
  return s;
}

}  // namespace

TEST(Stats, PearsonKnownValues) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 4, 5, 4, 5};
  const auto c = pearson(x, y);
  ASSERT_TRUE(c);
  // Hand computation: sxy = 6, sxx = 10, syy = 6.
  EXPECT_NEAR(c->r, 6.0 / std::sqrt(60.0), 1e-15);
  const double t = c->r * std::sqrt(3.0 / (1.0 - c->r * c->r));
  boost::math::students_t dist(3.0);
  EXPECT_NEAR(c->p, 2.0 * (1.0 - boost::math::cdf(dist, t)), 1e-12);
}

TEST(Stats, PearsonPValueForFivePoints) {
  // r = 0.577 over five points corresponds to p close to 0.309.
  const double r = 0.577, t = r * std::sqrt(3.0 / (1.0 - r * r));
  boost::math::students_t dist(3.0);
  EXPECT_NEAR(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.309, 0.002);
}

TEST(Stats, ConstantColumnIsAbsentWithZeroCv) {
  const std::vector<double> x = {0.5, 1, 2, 4, 8};
  const std::vector<double> y(5, 0.3);
  EXPECT_FALSE(pearson(x, y));
  EXPECT_EQ(coefficient_of_variation(y), 0.0);
  EXPECT_FALSE(spearman(x, y));
}

TEST(Stats, SpearmanUsesAverageRanks) {
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 100}).value(), 1.0);
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}).value(), -1.0);
  EXPECT_EQ(average_ranks(std::vector<double>{5, 1, 5, 3}), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Stats, CoefficientOfVariation) {
  const std::vector<double> xs = {1, 2, 3};
  EXPECT_DOUBLE_EQ(coefficient_of_variation(xs), 1.0 / 2.0);
}

TEST(Csv, QuotingFollowsRfc4180) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("line\nbreak"), "\"line\nbreak\"");
}

TEST(Csv, RoundTripThroughParser) {
  ResultRow row;
  row.condition_id = "odd,\"name\"";
  row.watermark = WatermarkConfig{};
  row.n_tokens = 10;
  row.z = 1.25;
  row.statistics = std::array<double, 6>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  row.trigger_count = 0;
  std::ostringstream os;
  write_csv(os, {row});
  const auto parsed = parse_csv(os.str());
  ASSERT_EQ(parsed.size(), 2u);
  ASSERT_EQ(parsed[0].size(), 24u);
  EXPECT_EQ(parsed[0].front(), "condition_id");
  EXPECT_EQ(parsed[0].back(), "trigger_count");
  EXPECT_EQ(parsed[1], row_fields(row));
  EXPECT_EQ(parsed[1][0], "odd,\"name\"");
  EXPECT_EQ(parsed[1][16], "");  // survival absent
}

TEST(Csv, ColumnOrder) {
  const std::vector<std::string> expected = {
      "condition_id", "scheme", "mode", "entropy_kind", "gamma", "delta", "alpha", "b",
      "p_act", "p_min", "sigma", "n_tokens", "seed", "z", "green_fraction", "target_rate",
      "survival", "rank_ks", "kl_div", "perplexity_f", "entropy_f", "repetition", "loglik_f",
      "trigger_count"};
  EXPECT_EQ(std::vector<std::string>(kCsvColumns.begin(), kCsvColumns.end()), expected);
}

TEST(Csv, NumbersRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5}) EXPECT_EQ(std::stod(format_number(x)), x);
  EXPECT_EQ(format_number(NAN), "");
}

TEST(Json, RecordRoundTrip) {
  PipelineConfig c;
  c.n_tokens = 200;
  c.watermark = WatermarkConfig{};
  c.attack.targets = default_targets(512);
  c.attack.mode = AttackMode::aware;
  c.entropy = EntropyKind::hijacked;
  const auto rec = generate(c);
  const auto text = record_to_json(rec).dump();
  const auto back = record_from_json(nlohmann::json::parse(text), c);
  EXPECT_EQ(back.tokens, rec.tokens);
  EXPECT_EQ(back.prompt, rec.prompt);
  EXPECT_EQ(back.steps, rec.steps);
  EXPECT_EQ(back.has_green, rec.has_green);
  EXPECT_EQ(record_to_json(back).dump(), text);
  EXPECT_THROW(record_from_json(nlohmann::json::parse("{\"tokens\": [1]}"), c), Error);
}

TEST(Json, RowRoundTripMatchesCsvFields) {
  ResultRow row;
  row.condition_id = "x";
  row.z = 2.5;
  row.survival = 1.1;
  const auto j = row_to_json(row);
  EXPECT_EQ(j.at("scheme"), "none");
  EXPECT_TRUE(j.at("gamma").is_null());
  EXPECT_EQ(j.at("z").get<double>(), 2.5);
  EXPECT_EQ(nlohmann::json::parse(j.dump()), j);
}

TEST(Config, FieldsMapVerbatim) {
  const auto j = nlohmann::json::parse(R"({
    "vocab_size": 256, "model_seed": 9, "n_tokens": 300, "temperature": 0.9, "top_k": 20,
    "scheme": "unigram", "gamma": 0.25, "delta": 1.5, "key": 17, "context_width": 2,
    "boost": 5, "activation": 0.4, "floor": 0.001, "sigma": 7, "mode": "blind",
    "entropy_kind": "hijacked", "run_seed": 3, "target_count": 16, "replicates": 4})");
  const auto s = apply_config(j);
  EXPECT_EQ(s.base.model.vocab_size, 256u);
  EXPECT_EQ(s.base.model.seed, 9u);
  EXPECT_EQ(s.base.n_tokens, 300u);
  EXPECT_EQ(s.base.top_k, 20u);
  EXPECT_EQ(s.base.watermark->scheme, Scheme::unigram);
  EXPECT_EQ(s.base.watermark->gamma, 0.25);
  EXPECT_EQ(s.base.watermark->context_width, 2u);
  EXPECT_EQ(s.base.attack.boost, 5.0);
  EXPECT_EQ(s.base.attack.sigma, 7u);
  EXPECT_EQ(s.base.attack.mode, AttackMode::blind);
  EXPECT_EQ(s.base.attack.targets.size(), 16u);
  EXPECT_EQ(s.base.entropy, EntropyKind::hijacked);
  EXPECT_EQ(s.replicates, 4u);
}

TEST(Config, ExplicitTargetsAndNoWatermark) {
  const auto s = apply_config(nlohmann::json::parse(R"({"targets": [3, 1, 3], "scheme": "none"})"));
  EXPECT_EQ(s.base.attack.targets, (TokenSet{1, 3}));
  EXPECT_FALSE(s.base.watermark);
}

TEST(Config, Errors) {
  EXPECT_THROW(apply_config(nlohmann::json::parse(R"({"bogus": 1})")), Error);
  EXPECT_THROW(apply_config(nlohmann::json::parse(R"({"gamma": "half"})")), Error);
  EXPECT_THROW(apply_config(nlohmann::json::parse(R"({"gamma": 2})")), Error);
  EXPECT_THROW(apply_config(nlohmann::json::parse(R"({"mode": "loud"})")), Error);
  EXPECT_THROW(apply_config(nlohmann::json::parse("[1, 2]")), Error);
  EXPECT_THROW(load_config_file("/nonexistent/config.json"), Error);
}

TEST(Experiments, ParallelMapIsOrderedAndPropagatesErrors) {
  const auto v = parallel_map(100, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], i * i);
  EXPECT_THROW(parallel_map(10, 3, [](std::size_t i) -> int { if (i == 7) throw Error("boom"); return 0; }),
               Error);
}

TEST(Experiments, SweepGridIsComplete) {
  const auto r = experiment_sweep(tiny_settings());
  ASSERT_EQ(r.cells.size(), 16u);
  std::set<std::string> ids;
  for (const auto& row : r.cell_rows()) ids.insert(row.condition_id);
  EXPECT_EQ(ids.size(), 16u);
  EXPECT_EQ(r.rows.size(), 32u);
  EXPECT_EQ(r.cells.front().activation, 0.3);
  EXPECT_EQ(r.cells.front().boost, 10.0);
  EXPECT_EQ(r.cells.back().activation, 0.9);
  EXPECT_EQ(r.cells.back().boost, 100.0);
  for (const auto& row : r.rows) EXPECT_EQ(row.attack.mode, AttackMode::blind);
}

TEST(Experiments, ThreadCountDoesNotChangeResults) {
  auto a = tiny_settings(), b = tiny_settings();
  a.threads = 1;
  b.threads = 3;
  const auto ra = experiment_sweep(a), rb = experiment_sweep(b);
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    EXPECT_EQ(ra.rows[i].z, rb.rows[i].z);
    EXPECT_EQ(ra.rows[i].target_rate, rb.rows[i].target_rate);
  }
}

TEST(Experiments, OrthogonalityColumns) {
  const auto r = experiment_orthogonality(tiny_settings());
  ASSERT_EQ(r.points.size(), 5u);
  EXPECT_EQ(r.points.front().delta, 0.5);
  EXPECT_EQ(r.points.back().delta, 8.0);
  EXPECT_EQ(r.rows.size(), 20u);
  for (const auto& row : r.rows) {
    if (row.condition_id.rfind("orth_attack", 0) == 0) {
      EXPECT_EQ(row.attack.mode, AttackMode::aware);
      EXPECT_EQ(row.entropy, EntropyKind::hijacked);
    }
  }
}

TEST(Experiments, MatrixShape) {
  auto s = tiny_settings();
  s.base.n_tokens = 200;
  s.reference_size = 16;
  const auto r = experiment_detection_matrix(s);
  ASSERT_EQ(r.summary.size(), 4u);
  EXPECT_EQ(r.rows.size(), 8u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.statistics);
    EXPECT_TRUE(row.trigger_count);
  }
  EXPECT_DOUBLE_EQ(r.summary[3].pooled_survival, 1.0);
  EXPECT_DOUBLE_EQ(r.summary[0].pooled_survival, r.summary[0].mean_z / r.summary[3].mean_z);
  s.reference_size = 8;
  EXPECT_THROW(experiment_detection_matrix(s), Error);
}

TEST(Experiments, DefenseConditions) {
  const auto r = experiment_qrng_defense(defense_settings(tiny_settings()));
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.rows[0].condition_id, "baseline");
  EXPECT_EQ(r.rows[1].entropy, EntropyKind::hijacked);
  EXPECT_EQ(r.rows[1].attack.mode, AttackMode::steering);
  EXPECT_EQ(r.rows[2].entropy, EntropyKind::qrng);
  EXPECT_EQ(r.rows[0].watermark->delta, 0.0);
  for (const auto& row : r.rows) {
    EXPECT_GT(row.scored, 0u);
    EXPECT_LE(row.scored, row.n_tokens);
  }
}

TEST(Selftest, AllPass) {
  for (const auto& r : run_selftests()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}
