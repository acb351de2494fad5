#ifndef SEEDLAB_TOKEN_SET_HPP
#define SEEDLAB_TOKEN_SET_HPP

#include <algorithm>
#include <initializer_list>
#include <vector>

#include "seedlab/core.hpp"
#include "seedlab/splitmix.hpp"

namespace seedlab {

/// Sorted, duplicate-free set of token ids.
class TokenSet {
public:
  TokenSet() = default;
  TokenSet(std::initializer_list<TokenId> ids) : ids_(ids) { normalize(); }
  explicit TokenSet(std::vector<TokenId> ids) : ids_(std::move(ids)) { normalize(); }

  bool contains(TokenId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<TokenId>& ids() const noexcept { return ids_; }
  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }

  friend bool operator==(const TokenSet&, const TokenSet&) = default;

private:
  void normalize() {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }
  std::vector<TokenId> ids_;
};

/// Uniformly random subset of {0..vocab_size-1} of the given size
/// (partial Fisher-Yates on a SplitMix64 stream).
inline TokenSet random_token_set(std::size_t vocab_size, std::size_t count,
                                 std::uint64_t seed) {
  if (count > vocab_size) throw Error("target set larger than vocabulary");
  std::vector<TokenId> pool(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) pool[i] = static_cast<TokenId>(i);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + rng.next_below(vocab_size - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return TokenSet(std::move(pool));
}

}  // namespace seedlab

#endif  // SEEDLAB_TOKEN_SET_HPP
