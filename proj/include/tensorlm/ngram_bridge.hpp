// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tensorlm/tensor.hpp"

namespace tensorlm {

using TokenId = std::uint32_t;
using Window = std::vector<TokenId>;

/// Maximum-likelihood joint distribution over length-n windows, stored as the
/// dense |V|^n coefficient tensor. Counts are kept next to the probabilities.
struct NgramTable {
  std::size_t order = 0;
  std::size_t vocab_size = 0;
  DenseTensor joint;
  std::vector<std::uint64_t> counts;  // same layout as joint
  std::uint64_t total_windows = 0;
};

/// One-hot sentence of length n over a vocabulary.
struct OneHotSentence {
  std::vector<TokenId> ids;
  std::size_t vocab_size = 0;
};

/// joint[d_1..d_n] = count(d_1..d_n) / total. No smoothing.
/// Throws kResourceLimit if vocab_size^n exceeds the dense entry limit and
/// kInvalidArgument on an empty stream, a wrong-length window or an id out of
/// range.
NgramTable build_joint(std::span<const Window> windows, std::size_t vocab_size,
                       std::size_t n);

/// Rank-one tensor of one-hot vectors; exactly one entry is 1.
DenseTensor sentence_tensor(const OneHotSentence& s);

/// One-hot vectors for the prefix followed by n - i all-ones vectors.
/// Requires 1 <= prefix.size() <= n.
DenseTensor prefix_tensor(std::span<const TokenId> prefix, std::size_t n,
                          std::size_t vocab_size);

/// ⟨prefix_tensor(prefix), joint⟩, i.e. the marginal p(w_1..w_i). An empty
/// prefix contracts against all-ones and gives the total mass.
double prefix_probability(const NgramTable& table, std::span<const TokenId> prefix);

/// p(next | prefix) as a ratio of two prefix-tensor inner products.
/// Throws kUnseenContext when the prefix has zero probability.
double conditional_prob(const NgramTable& table, std::span<const TokenId> prefix,
                        TokenId next);

/// Counting oracle that never touches tensors: the query's last token is
/// predicted from the rest, count(query as window prefix) / count(context as
/// window prefix). An empty context divides by the window count.
double oracle_ngram_prob(std::span<const Window> windows, std::span<const TokenId> query);

/// Empirical p(window) by counting.
double oracle_window_prob(std::span<const Window> windows, std::span<const TokenId> query);

/// Sliding length-n windows over each sentence separately; sentences shorter
/// than n contribute nothing.
std::vector<Window> sentence_windows(std::span<const std::vector<TokenId>> sentences,
                                     std::size_t n);

/// Maximum absolute deviations found by verify_ngram_identities.
struct NgramIdentityReport {
  std::size_t windows = 0;
  std::size_t distinct_windows = 0;
  double window_max_dev = 0.0;         // ⟨sentence tensor, joint⟩ vs counted p(window)
  double marginal_max_dev = 0.0;       // ⟨prefix tensor, joint⟩ vs enumerated and counted marginals
  double conditional_max_dev = 0.0;    // tensor ratio vs counting oracle
  double chain_rule_max_dev = 0.0;     // p(w_1)·∏ p(w_i | w_1^{i-1}) vs joint entry
  double orthogonality_max_dev = 0.0;  // ⟨s, s'⟩ for distinct observed windows

  double max_dev() const {
    double m = window_max_dev;
    for (double v : {marginal_max_dev, conditional_max_dev, chain_rule_max_dev,
                     orthogonality_max_dev})
      m = v > m ? v : m;
    return m;
  }
};

/// Checks every observed window and each of its prefixes against the tensor
/// route. Dense cost is O(distinct windows · n · |V|^n).
NgramIdentityReport verify_ngram_identities(std::span<const Window> windows, std::size_t vocab_size,
                                     std::size_t n);

}  // namespace tensorlm
