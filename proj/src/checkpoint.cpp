// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tensorlm {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'L', 'M'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::kFormat, "checkpoint is truncated");
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

void read_matrix(Reader& r, Matrix& m) {
  if (r.remaining() / 8 < m.data.size()) throw Error(ErrorCode::kFormat, "checkpoint is truncated");
  for (double& x : m.data) x = r.f64();
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TslmParams& params, const Vocab& vocab) {
  params.validate();
  if (vocab.size() != params.vocab_size()) {
    throw Error(ErrorCode::kShapeMismatch, "vocabulary size differs from model output size");
  }
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.embed_size()));
  w.u32(static_cast<std::uint32_t>(params.hidden_size()));
  w.u32(static_cast<std::uint32_t>(params.vocab_size()));
  for (auto t : params.tensors())
    for (double x : t) w.f64(x);
  w.u32(static_cast<std::uint32_t>(vocab.size()));
  for (const auto& tok : vocab.tokens()) {
    w.u32(static_cast<std::uint32_t>(tok.size()));
    w.bytes(tok.data(), tok.size());
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::kFormat, "not a TSLM checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t m = r.u32();
  const std::uint32_t hidden = r.u32();
  const std::uint32_t vocab = r.u32();
  if (m == 0 || hidden == 0 || vocab == 0) {
    throw Error(ErrorCode::kFormat, "checkpoint has a zero dimension");
  }
  // Reject sizes the payload cannot possibly hold before allocating.
  const std::uint64_t reals = std::uint64_t{vocab} * m + std::uint64_t{hidden} * m +
                              std::uint64_t{hidden} * hidden + std::uint64_t{vocab} * hidden +
                              hidden;
  if (reals > r.remaining() / 8) throw Error(ErrorCode::kFormat, "checkpoint is truncated");

  Checkpoint c;
  c.params = TslmParams::zeros(vocab, m, hidden);
  read_matrix(r, c.params.embed);
  read_matrix(r, c.params.u_mat);
  read_matrix(r, c.params.w_mat);
  read_matrix(r, c.params.v_mat);
  for (double& x : c.params.h0_pre) x = r.f64();

  const std::uint32_t count = r.u32();
  if (count != vocab) {
    throw Error(ErrorCode::kFormat, "checkpoint vocabulary count differs from |V|");
  }
  std::vector<std::string> tokens;
  tokens.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    tokens.push_back(r.str(len));
  }
  if (!r.done()) throw Error(ErrorCode::kFormat, "trailing bytes after checkpoint");
  try {
    c.vocab = Vocab(std::move(tokens));
    c.params.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("invalid checkpoint contents: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::string& path, const TslmParams& params, const Vocab& vocab) {
  const auto bytes = encode_checkpoint(params, vocab);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "error writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace tensorlm
