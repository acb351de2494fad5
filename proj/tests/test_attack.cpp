#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "seedlab/attack.hpp"
#include "seedlab/stats.hpp"

using namespace seedlab;

namespace {

AttackConfig cfg(AttackMode mode, TokenSet targets = {0}) {
  AttackConfig c;
  c.mode = mode;
  c.targets = std::move(targets);
  return c;
}

// Target reweighting written out directly.
Probs oracle_reweight(const Probs& p, const TokenSet& t, double b) {
  Probs out(p.size());
  double z = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) z += p[v] * (t.contains(static_cast<TokenId>(v)) ? b : 1.0);
  for (std::size_t v = 0; v < p.size(); ++v) out[v] = p[v] * (t.contains(static_cast<TokenId>(v)) ? b : 1.0) / z;
  return out;
}

}  // namespace

TEST(Reweight, HandCase) {
  const auto out = reweight(Probs(3, 1.0 / 3.0), TokenSet{0}, 3.0);
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.2, 1e-15);
  EXPECT_NEAR(out[2], 0.2, 1e-15);
}

TEST(Reweight, IdentityCases) {
  const Probs p = {0.1, 0.6, 0.3};
  EXPECT_EQ(reweight(p, TokenSet{1, 2}, 1.0), p);
  EXPECT_EQ(reweight(p, TokenSet{}, 10.0), p);
}

TEST(Reweight, MatchesOracleAndNormalizes) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.next_below(64);
    Probs p(n);
    double total = 0.0;
    for (double& x : p) total += (x = rng.next_uniform());
    if (total == 0.0) continue;
    for (double& x : p) x /= total;
    const auto t = random_token_set(n, rng.next_below(n + 1), rng.next());
    for (double b : {1.0, 2.0, 10.0}) {
      const auto out = reweight(p, t, b);
      const auto ref = oracle_reweight(p, t, b);
      ASSERT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), 1.0, 1e-12);
      for (std::size_t v = 0; v < n; ++v) ASSERT_NEAR(out[v], ref[v], 1e-14);
    }
  }
}

TEST(Reweight, Errors) {
  EXPECT_THROW(reweight(Probs{0.5, 0.6}, TokenSet{0}, 2.0), Error);
  EXPECT_THROW(reweight(Probs{0.5, 0.5}, TokenSet{0}, 0.5), Error);
}

TEST(EffectiveTargets, AwareIntersectsGreen) {
  GreenPartition part{std::vector<char>(10, 0), 0};
  for (int v : {2, 3, 9}) part.membership[v] = 1;
  EXPECT_EQ(effective_targets(cfg(AttackMode::aware, {1, 2, 3}), &part), (TokenSet{2, 3}));
  EXPECT_TRUE(effective_targets(cfg(AttackMode::aware, {0, 1}), &part).empty());
  EXPECT_EQ(effective_targets(cfg(AttackMode::blind, {1, 2, 3}), &part), (TokenSet{1, 2, 3}));
  EXPECT_EQ(effective_targets(cfg(AttackMode::steering, {4}), nullptr), (TokenSet{4}));
  EXPECT_THROW(effective_targets(cfg(AttackMode::aware), nullptr), Error);
}

TEST(AttackStep, GateConsumesOneUniform) {
  auto c = cfg(AttackMode::blind);
  PlantedSource gate({0.1, 0.9});
  const Probs p = {0.5, 0.5};
  EXPECT_TRUE(attack_step(c, p, nullptr, gate).activated);
  EXPECT_FALSE(attack_step(c, p, nullptr, gate).activated);
  EXPECT_EQ(gate.consumed(), 2u);
  c.mode = AttackMode::off;
  PlantedSource none({});
  EXPECT_FALSE(attack_step(c, p, nullptr, none).activated);
  EXPECT_EQ(none.consumed(), 0u);
}

TEST(AttackStep, ActivationExtremes) {
  auto src = EntropySource::hijacked(42);
  const Probs p = {0.25, 0.25, 0.5};
  auto c = cfg(AttackMode::blind, {0});
  c.activation = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto st = attack_step(c, p, nullptr, src);
    ASSERT_FALSE(st.activated);
    ASSERT_EQ(st.probs, p);
  }
  c.activation = 1.0;
  c.floor = 0.0;
  for (int i = 0; i < 200; ++i) ASSERT_TRUE(attack_step(c, p, nullptr, src).activated);
  c.floor = 1.0;
  for (int i = 0; i < 200; ++i) ASSERT_FALSE(attack_step(c, p, nullptr, src).activated);
}

TEST(AttackStep, AwareGreenMassDominatesByEnumeration) {
  // |V| = 8: for every green partition and a fixed distribution, the
  // expected green mass under the aware attack is at least the honest one.
  const Probs p = {0.3, 0.2, 0.15, 0.1, 0.1, 0.07, 0.05, 0.03};
  auto c = cfg(AttackMode::aware, {0, 2, 5, 7});
  c.activation = 0.3;
  for (unsigned mask = 0; mask < 256; ++mask) {
    GreenPartition part{std::vector<char>(8, 0), 0};
    for (int v = 0; v < 8; ++v) part.membership[v] = (mask >> v) & 1u;
    const auto boosted = reweight(p, effective_targets(c, &part), c.boost);
    double honest = 0.0, attacked = 0.0;
    for (int v = 0; v < 8; ++v)
      if (part.membership[v]) {
        honest += p[v];
        attacked += (1 - c.activation) * p[v] + c.activation * boosted[v];
      }
    EXPECT_GE(attacked, honest - 1e-15) << mask;
  }
}

TEST(AttackStep, TargetRateMonotoneInBoostAndActivation) {
  SplitMix64 rng(5);
  Probs p(64);
  double total = 0.0;
  for (double& x : p) total += (x = std::pow(rng.next_uniform(), 3.0) + 1e-3);
  for (double& x : p) x /= total;
  const auto t = random_token_set(64, 8, 3);
  std::vector<double> xs, ys, rates;
  for (double act : {0.0, 0.3, 0.7, 1.0})
    for (double b : {1.0, 3.0, 10.0, 30.0}) {
      auto c = cfg(AttackMode::blind, t);
      c.activation = act;
      c.boost = b;
      auto gate = EntropySource::hijacked(c.sigma);
      auto sampler = EntropySource::honest(11);
      int hits = 0;
      const int steps = 20000;
      for (int i = 0; i < steps; ++i) hits += t.contains(multinomial_draw(sampler, attack_step(c, p, nullptr, gate).probs));
      xs.push_back(act);
      ys.push_back(b);
      rates.push_back(hits / static_cast<double>(steps));
    }
  EXPECT_GE(spearman(xs, rates).value(), 0.0);
  EXPECT_GE(spearman(ys, rates).value(), 0.0);
  for (int row = 0; row < 4; ++row) {
    std::vector<double> bs(ys.begin() + row * 4, ys.begin() + row * 4 + 4);
    std::vector<double> rs(rates.begin() + row * 4, rates.begin() + row * 4 + 4);
    if (auto rho = spearman(bs, rs)) {
      EXPECT_GE(*rho, 0.0);
    }
  }
}

TEST(SteerStep, HijackedAlwaysLandsInTargets) {
  auto c = cfg(AttackMode::steering, {3, 7});
  c.activation = 1.0;
  c.floor = 0.0;
  auto source = EntropySource::hijacked(1);
  auto gate = EntropySource::hijacked(c.sigma);
  SplitMix64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    Probs p(10);
    double total = 0.0;
    for (double& x : p) total += (x = rng.next_uniform() + 0.01);
    for (double& x : p) x /= total;
    const auto r = steer_step(c, p, source, gate);
    ASSERT_TRUE(r.activated);
    ASSERT_TRUE(c.targets.contains(r.token));
  }
}

TEST(SteerStep, QrngSourceIsInert) {
  auto c = cfg(AttackMode::steering, random_token_set(512, 16, 4));
  c.activation = 1.0;
  auto source = EntropySource::qrng();
  auto gate = EntropySource::hijacked(c.sigma);
  const Probs p(512, 1.0 / 512);
  int hits = 0;
  const int steps = 10000;
  std::vector<int> counts(8, 0);
  const Probs p8(8, 0.125);
  for (int i = 0; i < steps; ++i) {
    const auto r = steer_step(c, p, source, gate);
    EXPECT_FALSE(r.activated);
    hits += c.targets.contains(r.token);
  }
  const double rate = 16.0 / 512.0;
  EXPECT_LE(std::abs(hits / static_cast<double>(steps) - rate), 4.0 * std::sqrt(rate * (1 - rate) / steps));

  // Chi-square goodness of fit of steered-mode qrng draws against the honest law.
  auto c8 = cfg(AttackMode::steering, {0});
  c8.activation = 1.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[steer_step(c8, p8, source, gate).token];
  double chi2 = 0.0;
  for (int k : counts) chi2 += std::pow(k - draws / 8.0, 2) / (draws / 8.0);
  EXPECT_LT(chi2, 24.32);  // chi-square 7 dof, p = 0.001
}

TEST(SteerStep, OffModeIsHonestDraw) {
  const auto c = cfg(AttackMode::off);
  auto a = EntropySource::hijacked(9), b = EntropySource::hijacked(9);
  const Probs p = {0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(steer_step(c, p, a).token, multinomial_draw(b, p));
}

TEST(TokenEdit, Properties) {
  Tokens seq(5000);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = static_cast<TokenId>(i % 512);
  EXPECT_EQ(token_edit_baseline(seq, 0.0, 3, 512), seq);
  EXPECT_EQ(token_edit_baseline(seq, 0.2, 3, 512), token_edit_baseline(seq, 0.2, 3, 512));
  const auto all = token_edit_baseline(seq, 1.0, 3, 512);
  std::size_t same = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) same += all[i] == seq[i];
  const double expect = 5000.0 / 512.0;
  EXPECT_LE(std::abs(same - expect), 4.0 * std::sqrt(expect));
  const auto some = token_edit_baseline(seq, 0.15, 8, 512);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) changed += some[i] != seq[i];
  const double rate = 0.15 * 511.0 / 512.0;
  EXPECT_LE(std::abs(changed / 5000.0 - rate), 4.0 * std::sqrt(rate * (1 - rate) / 5000.0));
  EXPECT_THROW(token_edit_baseline(seq, 1.5, 0, 512), Error);
}

TEST(AttackConfig, Validation) {
  auto c = cfg(AttackMode::blind, {});
  EXPECT_THROW(c.validate(16), Error);
  c = cfg(AttackMode::blind, {20});
  EXPECT_THROW(c.validate(16), Error);
  c = cfg(AttackMode::blind);
  c.boost = 0.5;
  EXPECT_THROW(c.validate(16), Error);
  c = cfg(AttackMode::blind);
  c.activation = 1.2;
  EXPECT_THROW(c.validate(16), Error);
  EXPECT_EQ(parse_attack_mode(to_string(AttackMode::steering)), AttackMode::steering);
  EXPECT_THROW(parse_attack_mode("loud"), Error);
}
