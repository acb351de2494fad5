#ifndef SEEDLAB_CORE_HPP
#define SEEDLAB_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seedlab {

using TokenId = std::uint32_t;
using Tokens = std::vector<TokenId>;
using Probs = std::vector<double>;

/// Every contract violation in the library surfaces as this type; the
/// message is the stable, user-facing part.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDistributionTolerance = 1e-9;

inline bool is_distribution(std::span<const double> probs) {
  if (probs.empty()) return false;
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    total += p;
  }
  return std::abs(total - 1.0) <= kDistributionTolerance;
}

inline void require_distribution(std::span<const double> probs) {
  if (!is_distribution(probs)) throw Error("invalid distribution");
}

/// Numerically stable softmax; -inf entries map to exactly zero.
inline Probs softmax(std::span<const double> logits) {
  Probs out(logits.size(), 0.0);
  double peak = -INFINITY;
  for (double l : logits) peak = std::max(peak, l);
  if (!std::isfinite(peak)) throw Error("softmax of an empty support");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::isfinite(logits[i]) ? std::exp(logits[i] - peak) : 0.0;
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

/// Shannon entropy in nats; zero-mass entries contribute nothing.
inline double entropy_nats(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace seedlab

#endif  // SEEDLAB_CORE_HPP
