#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "seedlab/core.hpp"
#include "seedlab/splitmix.hpp"
#include "seedlab/token_set.hpp"

using namespace seedlab;

namespace {

// Reference SplitMix64 written from the published algorithm, independent of
// the library class.
std::uint64_t reference_splitmix(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

TEST(SplitMix64, FirstOutputFromSeedZero) {
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
}

TEST(SplitMix64, MatchesReferenceStream) {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xDEADBEEFULL, ~0ULL}) {
    SplitMix64 rng(seed);
    std::uint64_t ref = seed;
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(rng.next(), reference_splitmix(ref));
  }
}

TEST(SplitMix64, UniformIsTop53BitsScaled) {
  SplitMix64 a(7), b(7);
  for (int i = 0; i < 100; ++i) {
    const double u = a.next_uniform();
    const std::uint64_t bits = b.next();
    EXPECT_EQ(u, std::ldexp(static_cast<double>(bits >> 11), -53));
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_EQ(to_unit(~0ULL), 1.0 - std::ldexp(1.0, -53));
}

TEST(SplitMix64, NextBelowIsInRangeAndRoughlyUniform) {
  SplitMix64 rng(3);
  std::map<std::uint64_t, int> counts;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) {
    const auto v = rng.next_below(6);
    ASSERT_LT(v, 6u);
    ++counts[v];
  }
  double chi2 = 0.0;
  for (const auto& [v, c] : counts) chi2 += std::pow(c - draws / 6.0, 2) / (draws / 6.0);
  EXPECT_LT(chi2, 20.5);  // chi-square 5 dof, p = 0.001
}

TEST(SplitMix64, PairMixIsOrderSensitive) {
  EXPECT_NE(mix64(1, 2), mix64(2, 1));
  EXPECT_EQ(mix64(1, 2), mix64(1, 2));
}

TEST(Distribution, Validation) {
  EXPECT_TRUE(is_distribution(Probs{0.25, 0.75}));
  EXPECT_FALSE(is_distribution(Probs{}));
  EXPECT_FALSE(is_distribution(Probs{0.5, 0.6}));
  EXPECT_FALSE(is_distribution(Probs{-0.1, 1.1}));
  EXPECT_FALSE(is_distribution(Probs{NAN, 1.0}));
  EXPECT_THROW(require_distribution(Probs{0.2}), Error);
}

TEST(Softmax, MatchesDirectFormula) {
  const std::vector<double> logits = {1.0, 2.0, -0.5, 3.0};
  const auto p = softmax(logits);
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  for (std::size_t i = 0; i < logits.size(); ++i) EXPECT_NEAR(p[i], std::exp(logits[i]) / z, 1e-15);
}

TEST(Softmax, NegativeInfinityIsExactZero) {
  const auto p = softmax(std::vector<double>{0.0, -INFINITY, 0.0});
  EXPECT_EQ(p[1], 0.0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_THROW(softmax(std::vector<double>{-INFINITY}), Error);
}

TEST(Entropy, UniformIsLogN) {
  EXPECT_NEAR(entropy_nats(Probs(8, 0.125)), std::log(8.0), 1e-15);
  EXPECT_EQ(entropy_nats(Probs{1.0, 0.0}), 0.0);
}

TEST(TokenSet, SortsAndDeduplicates) {
  const TokenSet s{5, 1, 5, 3};
  EXPECT_EQ(s.ids(), (std::vector<TokenId>{1, 3, 5}));
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(2));
}

TEST(TokenSet, RandomSetHasRequestedSizeAndRange) {
  const auto s = random_token_set(512, 128, 9);
  EXPECT_EQ(s.size(), 128u);
  EXPECT_LT(s.ids().back(), 512u);
  EXPECT_EQ(s, random_token_set(512, 128, 9));
  EXPECT_NE(s, random_token_set(512, 128, 10));
  EXPECT_THROW(random_token_set(4, 5, 0), Error);
}

TEST(TokenSet, RandomSetMembershipIsUniform) {
  // Each id should be chosen with probability count / vocab.
  std::vector<int> hits(16, 0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    for (TokenId v : random_token_set(16, 4, static_cast<std::uint64_t>(t))) ++hits[v];
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(trials), 0.25, 0.02);
}
