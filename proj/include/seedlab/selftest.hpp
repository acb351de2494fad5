#ifndef SEEDLAB_SELFTEST_HPP
#define SEEDLAB_SELFTEST_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "seedlab/attack.hpp"
#include "seedlab/entropy.hpp"
#include "seedlab/splitmix.hpp"
#include "seedlab/token_set.hpp"
#include "seedlab/watermark.hpp"

namespace seedlab {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline Probs random_distribution(SplitMix64& rng, std::size_t n) {
  Probs p(n);
  double total = 0.0;
  for (double& x : p) total += (x = rng.next_uniform() + 1e-3);
  for (double& x : p) x /= total;
  return p;
}

inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

}  // namespace detail

/// Mean DipMark output over all 720 orders of a 6-token vocabulary must
/// reproduce the input.
inline SelftestResult selftest_dipmark_enumeration(std::size_t inputs = 100, double alpha = 0.45) {
  SplitMix64 rng(0xD19A4C);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < inputs; ++trial) {
    const Probs p = trial == 0 ? Probs(6, 1.0 / 6.0) : detail::random_distribution(rng, 6);
    std::vector<TokenId> order(6);
    std::iota(order.begin(), order.end(), TokenId{0});
    Probs mean(6, 0.0);
    std::size_t count = 0;
    do {
      const auto out = reweight_dipmark_ordered(p, order, alpha);
      for (std::size_t v = 0; v < 6; ++v) mean[v] += out[v];
      ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    for (std::size_t v = 0; v < 6; ++v) worst = std::max(worst, std::abs(mean[v] / count - p[v]));
  }
  return {"dipmark_enumeration", worst <= 1e-9, "max deviation " + detail::sci(worst)};
}

/// Every 3-token distribution on a 0.05 grid and every target subset with
/// positive mass: the steered draw lands inside the target set.
inline SelftestResult selftest_steer_exhaustive() {
  std::size_t cases = 0, misses = 0;
  for (int a = 0; a <= 20; ++a) {
    for (int b = 0; a + b <= 20; ++b) {
      const int c = 20 - a - b;
      const Probs p = {a / 20.0, b / 20.0, c / 20.0};
      for (unsigned mask = 1; mask < 8; ++mask) {
        std::vector<TokenId> ids;
        double mass = 0.0;
        for (TokenId v = 0; v < 3; ++v)
          if (mask & (1u << v)) {
            ids.push_back(v);
            mass += p[v];
          }
        if (mass <= 0.0) continue;
        const TokenSet target(ids);
        ++cases;
        const auto u = steer_draw(p, target);
        if (!u || !target.contains(inverse_cdf(p, *u))) ++misses;
      }
    }
  }
  return {"steer_exhaustive", misses == 0,
          std::to_string(cases) + " cases, " + std::to_string(misses) + " misses"};
}

/// Reweight on random inputs: output sums to one, boost 1 is the identity,
/// and the uniform 3-token hand case (to within 1e-15, since 0.6 and 0.2
/// have no exact binary form).
inline SelftestResult selftest_reweight_normalization(std::size_t trials = 10000) {
  SplitMix64 rng(0x4E0F3A);
  double worst_sum = 0.0;
  bool identity = true;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + rng.next_below(64);
    const Probs p = detail::random_distribution(rng, n);
    const TokenSet target = random_token_set(n, rng.next_below(n + 1), rng.next());
    for (double b : {1.0, 2.0, 10.0}) {
      const auto out = reweight(p, target, b);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(out.begin(), out.end(), 0.0) - 1.0));
      if (b == 1.0 && out != p) identity = false;
    }
  }
  const Probs third(3, 1.0 / 3.0);
  const auto hand = reweight(third, TokenSet({0}), 3.0);
  const Probs expected = {0.6, 0.2, 0.2};
  bool hand_ok = hand.size() == 3;
  for (std::size_t v = 0; hand_ok && v < 3; ++v) hand_ok = std::abs(hand[v] - expected[v]) <= 1e-15;
  return {"reweight_normalization", worst_sum <= 1e-12 && identity && hand_ok,
          "max |sum-1| " + detail::sci(worst_sum) + (identity ? "" : ", b=1 not identity") +
              (hand_ok ? "" : ", hand case mismatch")};
}

inline std::vector<SelftestResult> run_selftests() {
  return {selftest_dipmark_enumeration(), selftest_steer_exhaustive(), selftest_reweight_normalization()};
}

}  // namespace seedlab

#endif  // SEEDLAB_SELFTEST_HPP
