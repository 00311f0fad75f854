// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace tensorlm {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

// Calls on_token(token) for each whitespace-separated token and on_eol() at
// every newline. A trailing line without a newline still ends with on_eol().
template <typename OnToken, typename OnEol>
void scan(std::string_view text, OnToken on_token, OnEol on_eol) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == '\n') {
      on_eol();
      ++i;
    } else if (is_space(c)) {
      ++i;
    } else {
      std::size_t j = i;
      while (j < n && text[j] != '\n' && !is_space(text[j])) ++j;
      on_token(text.substr(i, j - i));
      i = j;
    }
  }
  if (n > 0 && text.back() != '\n') on_eol();
}

}  // namespace

Vocab::Vocab() : Vocab(std::vector<std::string>{std::string(kUnkToken), std::string(kEosToken)}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2 || tokens_[0] != kUnkToken || tokens_[1] != kEosToken) {
    throw Error(ErrorCode::kInvalidArgument, "vocabulary must start with <unk>, <eos>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "token id out of range");
  }
  return tokens_[id];
}

Vocab build_vocab(std::string_view text, const VocabOptions& options) {
  if (options.max_size != 0 && options.max_size < 2) {
    throw Error(ErrorCode::kInvalidArgument, "max_size must leave room for <unk> and <eos>");
  }
  std::map<std::string, std::size_t, std::less<>> freq;
  std::size_t n_tokens = 0;
  scan(
      text,
      [&](std::string_view tok) {
        ++n_tokens;
        if (tok == kUnkToken || tok == kEosToken) return;
        auto it = freq.find(tok);
        if (it == freq.end()) {
          freq.emplace(std::string(tok), 1);
        } else {
          ++it->second;
        }
      },
      [] {});
  if (n_tokens == 0) {
    throw Error(ErrorCode::kInvalidArgument, "build_vocab: input has no tokens");
  }

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, c] : freq)
    if (c >= options.min_count) ranked.emplace_back(tok, c);
  // freq is already lexicographic, so a stable sort on count keeps ties ordered.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens{std::string(kUnkToken), std::string(kEosToken)};
  for (auto& [tok, c] : ranked) {
    if (options.max_size != 0 && tokens.size() >= options.max_size) break;
    tokens.push_back(std::move(tok));
  }
  return Vocab(std::move(tokens));
}

TokenSeq encode(std::string_view text, const Vocab& vocab) {
  TokenSeq seq;
  seq.unk_id = vocab.unk_id();
  scan(
      text, [&](std::string_view tok) { seq.ids.push_back(vocab.id(tok)); },
      [&] { seq.ids.push_back(vocab.eos_id()); });
  return seq;
}

std::string decode(const TokenSeq& seq, const Vocab& vocab) {
  std::string out;
  bool line_start = true;
  for (TokenId id : seq.ids) {
    if (id == vocab.eos_id()) {
      out += '\n';
      line_start = true;
      continue;
    }
    if (!line_start) out += ' ';
    out += vocab.token(id);
    line_start = false;
  }
  return out;
}

std::vector<std::vector<TokenId>> encode_sentences(std::string_view text, const Vocab& vocab) {
  std::vector<std::vector<TokenId>> out(1);
  scan(
      text, [&](std::string_view tok) { out.back().push_back(vocab.id(tok)); },
      [&] { out.emplace_back(); });
  out.pop_back();
  return out;
}

double oov_rate(const TokenSeq& seq) {
  if (seq.ids.empty()) return 0.0;
  const auto unk = std::count(seq.ids.begin(), seq.ids.end(), seq.unk_id);
  return static_cast<double>(unk) / static_cast<double>(seq.ids.size());
}

Batcher::Batcher(const TokenSeq& seq, std::size_t batch_size, std::size_t seq_len)
    : ids_(&seq.ids), batch_size_(batch_size), seq_len_(seq_len) {
  if (batch_size == 0 || seq_len == 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch_size and seq_len must be positive");
  }
  if (seq.ids.size() < batch_size * (seq_len + 1)) {
    throw Error(ErrorCode::kInvalidArgument,
                "stream of " + std::to_string(seq.ids.size()) +
                    " tokens is too short for batch_size " + std::to_string(batch_size) +
                    " and seq_len " + std::to_string(seq_len));
  }
  row_len_ = seq.ids.size() / batch_size;
  num_batches_ = (row_len_ - 1) / seq_len;
}

Batch Batcher::batch(std::size_t k) const {
  if (k >= num_batches_) throw Error(ErrorCode::kInvalidArgument, "batch index out of range");
  Batch b;
  b.batch_size = batch_size_;
  b.seq_len = seq_len_;
  b.inputs.resize(batch_size_ * seq_len_);
  b.targets.resize(batch_size_ * seq_len_);
  const auto& ids = *ids_;
  for (std::size_t row = 0; row < batch_size_; ++row) {
    const std::size_t base = row * row_len_ + k * seq_len_;
    for (std::size_t t = 0; t < seq_len_; ++t) {
      b.inputs[row * seq_len_ + t] = ids[base + t];
      b.targets[row * seq_len_ + t] = ids[base + t + 1];
    }
  }
  return b;
}

std::vector<Window> stream_windows(const TokenSeq& seq, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "window length must be >= 1");
  std::vector<Window> out;
  for (std::size_t i = 0; i + n <= seq.ids.size(); ++i) {
    out.emplace_back(seq.ids.begin() + static_cast<std::ptrdiff_t>(i),
                     seq.ids.begin() + static_cast<std::ptrdiff_t>(i + n));
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "error reading " + path);
  return ss.str();
}

Corpus load_corpus(const std::string& train_path, const std::string& valid_path,
                   const std::string& test_path, const VocabOptions& options) {
  const std::string train = read_text_file(train_path);
  Corpus c;
  c.vocab = build_vocab(train, options);
  c.train = encode(train, c.vocab);
  c.valid = encode(read_text_file(valid_path), c.vocab);
  if (!test_path.empty()) c.test = encode(read_text_file(test_path), c.vocab);
  return c;
}

}  // namespace tensorlm
