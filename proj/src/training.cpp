// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace tensorlm {

namespace {

constexpr std::size_t kEvalChunk = 4096;

// Neumaier summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return std::isinf(sum_) ? sum_ : sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void sgd_step(TslmParams& params, const Gradients& grads, double lr) {
  auto ps = params.tensors();
  auto gs = grads.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (std::size_t i = 0; i < ps[k].size(); ++i) ps[k][i] -= lr * gs[k][i];
}

void zero(Gradients& g) {
  for (auto t : g.tensors()) std::fill(t.begin(), t.end(), 0.0);
}

}  // namespace

TrainConfig TrainConfig::for_cell(CellKind cell) {
  TrainConfig c;
  c.cell = cell;
  if (cell == CellKind::kAdditive) {
    c.init = InitScheme::kUniform;
    c.init_scale = 0.08;
    c.learning_rate = 1.0;
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || seq_len == 0 || hidden_size == 0 || embed_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "train config sizes must be positive");
  }
  if (!(learning_rate > 0.0) || !(clip_norm > 0.0) || !(init_scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "learning rate, clip norm and init scale must be positive");
  }
}

EvalReport report_from_log_probs(std::string split, std::span<const double> log_probs) {
  if (log_probs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "perplexity of an empty sequence");
  }
  CompensatedSum s;
  for (double lp : log_probs) s.add(-lp);
  EvalReport r;
  r.split = std::move(split);
  r.tokens = log_probs.size();
  r.mean_nll = s.value() / static_cast<double>(log_probs.size());
  r.perplexity = std::exp(r.mean_nll);
  return r;
}

std::vector<double> token_log_probs(const TslmParams& params, const TokenSeq& seq,
                                    const ModelOptions& options) {
  if (seq.ids.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "perplexity needs at least two tokens");
  }
  std::vector<double> out;
  out.reserve(seq.ids.size() - 1);
  HiddenState state = HiddenState::start();
  const std::span<const TokenId> ids(seq.ids);
  // The last token is never an input.
  const std::size_t inputs = ids.size() - 1;
  for (std::size_t c = 0; c < inputs; c += kEvalChunk) {
    const std::size_t len = std::min(kEvalChunk, inputs - c);
    const ForwardTrace tr = forward_sequence(params, ids.subspan(c, len), options, state);
    for (std::size_t t = 0; t < len; ++t) {
      const TokenId next = ids[c + t + 1];
      if (next >= params.vocab_size()) {
        throw Error(ErrorCode::kInvalidArgument, "token id outside model vocabulary");
      }
      out.push_back(tr.log_probs[t][next]);
    }
    state = tr.end_state;
  }
  return out;
}

EvalReport perplexity(const TslmParams& params, const TokenSeq& seq, const ModelOptions& options,
                      std::string split) {
  params.validate();
  const auto lp = token_log_probs(params, seq, options);
  return report_from_log_probs(std::move(split), lp);
}

double clip_gradients(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (auto t : grads.tensors())
    for (double g : t) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto t : grads.tensors())
      for (double& g : t) g *= s;
  }
  return norm;
}

TrainResult train(const TslmParams& init, const TokenSeq& train_seq, const TokenSeq& valid_seq,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  init.validate();
  const ModelOptions options = config.model_options();
  const Batcher batcher(train_seq, config.batch_size, config.seq_len);
  const std::size_t B = config.batch_size;
  const std::size_t L = config.seq_len;
  const double inv_tokens = 1.0 / static_cast<double>(B * L);

  TrainResult result;
  TslmParams params = init;
  Gradients grads =
      Gradients::zeros(params.vocab_size(), params.embed_size(), params.hidden_size());
  double lr = config.learning_rate;
  const bool validate = !valid_seq.ids.empty();
  double best_valid = validate ? perplexity(params, valid_seq, options, "valid").perplexity
                               : std::numeric_limits<double>::quiet_NaN();
  result.params = params;
  result.best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<HiddenState> states(B);
    CompensatedSum epoch_nll;

    for (std::size_t k = 0; k < batcher.num_batches(); ++k) {
      const Batch batch = batcher.batch(k);
      zero(grads);
      double total = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const std::span<const TokenId> in(batch.inputs.data() + b * L, L);
        const std::span<const TokenId> tg(batch.targets.data() + b * L, L);
        HiddenState next;
        total += accumulate_gradients(params, in, tg, options, states[b], inv_tokens, grads, &next);
        states[b] = std::move(next);
      }
      if (!std::isfinite(total)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << ", batch " << k + 1
            << " (learning rate " << lr << ")";
        throw Error(ErrorCode::kNumerical, msg.str());
      }
      epoch_nll.add(total);
      clip_gradients(grads, config.clip_norm);
      sgd_step(params, grads, lr);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_ppl =
        std::exp(epoch_nll.value() / static_cast<double>(batcher.tokens_per_epoch()));
    m.valid_ppl = validate ? perplexity(params, valid_seq, options, "valid").perplexity
                           : std::numeric_limits<double>::quiet_NaN();
    m.learning_rate = lr;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(m);

    if (!validate) {
      result.params = params;
      result.best_epoch = epoch;
    } else if (m.valid_ppl < best_valid) {
      best_valid = m.valid_ppl;
      result.params = params;
      result.best_epoch = epoch;
    } else {
      params = result.params;
      lr *= 0.5;
    }
    if (on_epoch) on_epoch(m);
  }
  return result;
}

TrainResult train(std::size_t vocab_size, const TokenSeq& train_seq, const TokenSeq& valid_seq,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const TslmParams init =
      TslmParams::initialize(config.init, vocab_size, config.embed_size, config.hidden_size,
                             config.init_scale, config.seed, config.cell);
  return train(init, train_seq, valid_seq, config, on_epoch);
}

EvalReport baseline_ngram(const TokenSeq& train_seq, const TokenSeq& eval_seq,
                          std::size_t vocab_size, std::size_t n, double add_k,
                          std::string split) {
  if (n < 1 || n > 3) throw Error(ErrorCode::kInvalidArgument, "baseline n must be 1, 2 or 3");
  if (!(add_k >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "add_k must be >= 0");
  if (eval_seq.ids.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "perplexity needs at least two tokens");
  }
  // counts[ctx] = (per-next-token counts, total). Contexts of every length
  // below n are stored so stream-initial positions can use shorter history.
  struct Ctx {
    std::map<TokenId, std::uint64_t> next;
    std::uint64_t total = 0;
  };
  std::map<std::vector<TokenId>, Ctx> counts;
  const auto& tr = train_seq.ids;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr[i] >= vocab_size) throw Error(ErrorCode::kInvalidArgument, "token id outside vocabulary");
    for (std::size_t h = 0; h < n && h <= i; ++h) {
      std::vector<TokenId> ctx(tr.begin() + static_cast<std::ptrdiff_t>(i - h),
                               tr.begin() + static_cast<std::ptrdiff_t>(i));
      Ctx& c = counts[ctx];
      ++c.next[tr[i]];
      ++c.total;
    }
  }

  const auto& ev = eval_seq.ids;
  const double kv = add_k * static_cast<double>(vocab_size);
  std::vector<double> lps;
  lps.reserve(ev.size() - 1);
  for (std::size_t i = 1; i < ev.size(); ++i) {
    if (ev[i] >= vocab_size) throw Error(ErrorCode::kInvalidArgument, "token id outside vocabulary");
    const std::size_t h = std::min(n - 1, i);
    const std::vector<TokenId> ctx(ev.begin() + static_cast<std::ptrdiff_t>(i - h),
                                   ev.begin() + static_cast<std::ptrdiff_t>(i));
    double num = add_k;
    double den = kv;
    if (auto it = counts.find(ctx); it != counts.end()) {
      den += static_cast<double>(it->second.total);
      if (auto jt = it->second.next.find(ev[i]); jt != it->second.next.end()) {
        num += static_cast<double>(jt->second);
      }
    }
    lps.push_back(num > 0.0 && den > 0.0 ? std::log(num / den)
                                         : -std::numeric_limits<double>::infinity());
  }
  return report_from_log_probs(std::move(split), lps);
}

std::vector<SweepRow> sweep(const Corpus& corpus, const TrainConfig& base, SweepParam param,
                            std::span<const std::size_t> values) {
  std::vector<SweepRow> rows;
  for (std::size_t v : values) {
    TrainConfig cfg = base;
    if (param == SweepParam::kSeqLen) {
      cfg.seq_len = v;
    } else {
      cfg.hidden_size = v;
      cfg.embed_size = v;
    }
    const TrainResult res = train(corpus.vocab.size(), corpus.train, corpus.valid, cfg);
    SweepRow row;
    row.value = v;
    row.valid_ppl = perplexity(res.params, corpus.valid, cfg.model_options(), "valid").perplexity;
    row.test_ppl = corpus.test.ids.empty()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : perplexity(res.params, corpus.test, cfg.model_options(), "test").perplexity;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tensorlm
