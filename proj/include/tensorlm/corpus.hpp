// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tensorlm/ngram_bridge.hpp"

namespace tensorlm {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";

/// Token <-> id mapping. Ids are dense: <unk> is 0, <eos> is 1, the rest
/// follow in order of decreasing frequency, ties broken lexicographically.
class Vocab {
 public:
  Vocab();
  /// Builds from an explicit token list, which must start with <unk>, <eos>
  /// and contain no duplicates (the checkpoint loader uses this).
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId unk_id() const noexcept { return 0; }
  TokenId eos_id() const noexcept { return 1; }

  /// Unknown tokens map to unk_id().
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct VocabOptions {
  std::size_t min_count = 1;  // tokens seen fewer times map to <unk>
  std::size_t max_size = 0;   // total size including the two specials; 0 = unlimited
};

/// Whitespace tokenization; every line break is an <eos> occurrence.
/// Throws kInvalidArgument if the text has no tokens, or if max_size is
/// below 2.
Vocab build_vocab(std::string_view text, const VocabOptions& options = {});

/// Contiguous id stream with <eos> appended after every line.
struct TokenSeq {
  std::vector<TokenId> ids;
  TokenId unk_id = 0;

  std::size_t size() const noexcept { return ids.size(); }
};

TokenSeq encode(std::string_view text, const Vocab& vocab);

/// Inverse of encode up to <unk> substitution: tokens joined by single spaces,
/// <eos> rendered as a newline.
std::string decode(const TokenSeq& seq, const Vocab& vocab);

/// Per-line token id lists, without <eos>; used for the sentence-window oracle.
std::vector<std::vector<TokenId>> encode_sentences(std::string_view text, const Vocab& vocab);

/// Fraction of ids equal to the unknown id; 0 for an empty stream.
double oov_rate(const TokenSeq& seq);

/// One (input, target) block of a batched stream; both are batch_size rows of
/// seq_len ids, row-major.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<TokenId> inputs;
  std::vector<TokenId> targets;

  TokenId input(std::size_t b, std::size_t t) const { return inputs[b * seq_len + t]; }
  TokenId target(std::size_t b, std::size_t t) const { return targets[b * seq_len + t]; }
};

/// The stream is cut into batch_size contiguous rows of |seq| / batch_size
/// tokens; batch k covers columns [k·seq_len, (k+1)·seq_len) of every row and
/// targets are shifted by one. Row b of batch k+1 continues row b of batch k,
/// so hidden state may be carried between consecutive batches.
class Batcher {
 public:
  /// Throws kInvalidArgument when |seq| < batch_size·(seq_len + 1).
  Batcher(const TokenSeq& seq, std::size_t batch_size, std::size_t seq_len);

  std::size_t num_batches() const noexcept { return num_batches_; }
  std::size_t tokens_per_epoch() const noexcept {
    return batch_size_ * seq_len_ * num_batches_;
  }
  Batch batch(std::size_t k) const;

 private:
  const std::vector<TokenId>* ids_;
  std::size_t batch_size_;
  std::size_t seq_len_;
  std::size_t row_len_;
  std::size_t num_batches_;
};

/// All |seq| - n + 1 length-n windows of the stream.
std::vector<Window> stream_windows(const TokenSeq& seq, std::size_t n);

/// Reads a whole UTF-8 file. Throws kIo on failure.
std::string read_text_file(const std::string& path);

/// Train/valid/test splits encoded with a vocabulary built from train.
struct Corpus {
  Vocab vocab;
  TokenSeq train;
  TokenSeq valid;
  TokenSeq test;
};

/// An empty test_path leaves the test split empty.
Corpus load_corpus(const std::string& train_path, const std::string& valid_path,
                   const std::string& test_path, const VocabOptions& options = {});

}  // namespace tensorlm
