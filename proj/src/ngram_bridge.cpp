// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/ngram_bridge.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

namespace tensorlm {

namespace {

Vector one_hot(TokenId id, std::size_t vocab_size) {
  if (id >= vocab_size) {
    throw Error(ErrorCode::kInvalidArgument,
                "token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(vocab_size));
  }
  Vector v(vocab_size, 0.0);
  v[id] = 1.0;
  return v;
}

bool starts_with(const Window& w, std::span<const TokenId> prefix) {
  if (w.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (w[i] != prefix[i]) return false;
  return true;
}

std::uint64_t count_prefix(std::span<const Window> windows, std::span<const TokenId> prefix) {
  std::uint64_t c = 0;
  for (const auto& w : windows)
    if (starts_with(w, prefix)) ++c;
  return c;
}

}  // namespace

NgramTable build_joint(std::span<const Window> windows, std::size_t vocab_size,
                       std::size_t n) {
  if (n < 1 || vocab_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "build_joint needs n >= 1 and a nonempty vocabulary");
  }
  if (windows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "build_joint: empty window stream");
  }
  NgramTable table;
  table.order = n;
  table.vocab_size = vocab_size;
  table.joint = DenseTensor::zeros(Shape(n, vocab_size));
  table.counts.assign(table.joint.size(), 0);

  std::vector<std::size_t> idx(n);
  for (const auto& w : windows) {
    if (w.size() != n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "window of length " + std::to_string(w.size()) + ", expected " +
                      std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] >= vocab_size) {
        throw Error(ErrorCode::kInvalidArgument, "window id outside vocabulary");
      }
      idx[i] = w[i];
    }
    ++table.counts[table.joint.offset(idx)];
    ++table.total_windows;
  }
  auto joint = table.joint.data();
  const double total = static_cast<double>(table.total_windows);
  for (std::size_t e = 0; e < joint.size(); ++e) {
    joint[e] = static_cast<double>(table.counts[e]) / total;
  }
  return table;
}

DenseTensor sentence_tensor(const OneHotSentence& s) {
  if (s.ids.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sentence_tensor of an empty sentence");
  }
  std::vector<Vector> vs;
  vs.reserve(s.ids.size());
  for (TokenId id : s.ids) vs.push_back(one_hot(id, s.vocab_size));
  return rank_one(vs);
}

DenseTensor prefix_tensor(std::span<const TokenId> prefix, std::size_t n,
                          std::size_t vocab_size) {
  if (prefix.empty() || prefix.size() > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "prefix length " + std::to_string(prefix.size()) + " outside [1, " +
                    std::to_string(n) + "]");
  }
  std::vector<Vector> vs;
  vs.reserve(n);
  for (TokenId id : prefix) vs.push_back(one_hot(id, vocab_size));
  while (vs.size() < n) vs.emplace_back(vocab_size, 1.0);
  return rank_one(vs);
}

double prefix_probability(const NgramTable& table, std::span<const TokenId> prefix) {
  if (prefix.empty()) {
    return inner_product(DenseTensor::filled(table.joint.shape(), 1.0), table.joint);
  }
  return inner_product(prefix_tensor(prefix, table.order, table.vocab_size), table.joint);
}

double conditional_prob(const NgramTable& table, std::span<const TokenId> prefix,
                        TokenId next) {
  if (prefix.size() + 1 > table.order) {
    throw Error(ErrorCode::kInvalidArgument, "conditional_prob: prefix longer than n - 1");
  }
  const double denom = prefix_probability(table, prefix);
  if (denom <= 0.0) {
    throw Error(ErrorCode::kUnseenContext, "conditional_prob: unseen context");
  }
  std::vector<TokenId> full(prefix.begin(), prefix.end());
  full.push_back(next);
  return prefix_probability(table, full) / denom;
}

double oracle_ngram_prob(std::span<const Window> windows, std::span<const TokenId> query) {
  if (query.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "oracle_ngram_prob: empty query");
  }
  const auto context = query.first(query.size() - 1);
  const std::uint64_t denom = count_prefix(windows, context);
  if (denom == 0) {
    throw Error(ErrorCode::kUnseenContext, "oracle_ngram_prob: unseen prefix");
  }
  return static_cast<double>(count_prefix(windows, query)) / static_cast<double>(denom);
}

double oracle_window_prob(std::span<const Window> windows, std::span<const TokenId> query) {
  if (windows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "oracle_window_prob: no windows");
  }
  std::uint64_t c = 0;
  for (const auto& w : windows)
    if (w.size() == query.size() && starts_with(w, query)) ++c;
  return static_cast<double>(c) / static_cast<double>(windows.size());
}

std::vector<Window> sentence_windows(std::span<const std::vector<TokenId>> sentences,
                                     std::size_t n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "window length must be >= 1");
  std::vector<Window> out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      out.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(i),
                       s.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
  }
  return out;
}

namespace {

struct WindowHash {
  std::size_t operator()(const Window& w) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (TokenId id : w) h = (h ^ id) * 0x100000001b3ULL;
    return h;
  }
};

// Σ of joint entries whose leading indices equal the prefix, by enumerating
// every suffix.
double brute_force_marginal(const NgramTable& table, std::span<const TokenId> prefix) {
  const std::size_t free = table.order - prefix.size();
  std::vector<std::size_t> idx(table.order, 0);
  for (std::size_t i = 0; i < prefix.size(); ++i) idx[i] = prefix[i];
  double s = 0.0;
  while (true) {
    s += table.joint.at(idx);
    // Odometer over the free trailing indices.
    std::size_t k = table.order;
    while (k > prefix.size()) {
      --k;
      if (++idx[k] < table.vocab_size) break;
      idx[k] = 0;
      if (k == prefix.size()) return s;
    }
    if (free == 0) return s;
  }
}

}  // namespace

NgramIdentityReport verify_ngram_identities(std::span<const Window> windows, std::size_t vocab_size,
                                     std::size_t n) {
  const NgramTable table = build_joint(windows, vocab_size, n);
  std::unordered_map<Window, std::uint64_t, WindowHash> counts;
  for (const auto& w : windows) ++counts[w];

  NgramIdentityReport rep;
  rep.windows = windows.size();
  rep.distinct_windows = counts.size();
  auto track = [](double& slot, double dev) { slot = std::max(slot, std::abs(dev)); };

  for (const auto& [w, c] : counts) {
    const double empirical = static_cast<double>(c) / static_cast<double>(windows.size());
    const double via_tensor =
        inner_product(sentence_tensor(OneHotSentence{w, vocab_size}), table.joint);
    track(rep.window_max_dev, via_tensor - oracle_window_prob(windows, w));
    track(rep.window_max_dev, via_tensor - empirical);

    double chain = 1.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const std::span<const TokenId> prefix(w.data(), i);
      const double marginal = prefix_probability(table, prefix);
      track(rep.marginal_max_dev, marginal - brute_force_marginal(table, prefix));
      track(rep.marginal_max_dev, marginal - static_cast<double>(count_prefix(windows, prefix)) /
                                               static_cast<double>(windows.size()));

      const double cond = conditional_prob(table, prefix.first(i - 1), w[i - 1]);
      track(rep.conditional_max_dev, cond - oracle_ngram_prob(windows, prefix));
      chain *= cond;
    }
    track(rep.chain_rule_max_dev, chain - via_tensor);

    // Orthogonality against one other observed window, if any.
    for (const auto& [other, oc] : counts) {
      if (other == w) continue;
      const double ip = inner_product(sentence_tensor(OneHotSentence{w, vocab_size}),
                                      sentence_tensor(OneHotSentence{other, vocab_size}));
      track(rep.orthogonality_max_dev, ip);
      break;
    }
  }
  return rep;
}

}  // namespace tensorlm
