// SPDX-License-Identifier: Apache-2.0
#include "tensorlm.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <new>
#include <random>
#include <string>
#include <vector>

#include "tensorlm/checkpoint.hpp"
#include "tensorlm/corpus.hpp"
#include "tensorlm/decomposition.hpp"
#include "tensorlm/error.hpp"
#include "tensorlm/ngram_bridge.hpp"
#include "tensorlm/training.hpp"
#include "tensorlm/tslm_model.hpp"

struct tlm_corpus {
  tensorlm::Corpus corpus;
};

struct tlm_model {
  tensorlm::TslmParams params;
  tensorlm::Vocab vocab;
  tensorlm::ModelOptions options;
};

namespace {

using namespace tensorlm;

thread_local std::string g_last_error;

tlm_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return TLM_ERR_INVALID_ARGUMENT;
    case ErrorCode::kShapeMismatch: return TLM_ERR_SHAPE_MISMATCH;
    case ErrorCode::kResourceLimit: return TLM_ERR_RESOURCE_LIMIT;
    case ErrorCode::kUnseenContext: return TLM_ERR_UNSEEN_CONTEXT;
    case ErrorCode::kNumerical: return TLM_ERR_NUMERICAL;
    case ErrorCode::kIo: return TLM_ERR_IO;
    case ErrorCode::kFormat: return TLM_ERR_FORMAT;
  }
  return TLM_ERR_INTERNAL;
}

tlm_status fail(tlm_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
tlm_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return TLM_OK;
  } catch (const Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TLM_ERR_RESOURCE_LIMIT, "out of memory");
  } catch (const std::exception& e) {
    return fail(TLM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TLM_ERR_INTERNAL, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

CellKind to_cell(tlm_cell cell) {
  require(cell == TLM_CELL_TSLM || cell == TLM_CELL_RNN, "unknown cell kind");
  return cell == TLM_CELL_RNN ? CellKind::kAdditive : CellKind::kMultiplicative;
}

InitScheme to_init(tlm_init init) {
  require(init == TLM_INIT_POSITIVE || init == TLM_INIT_UNIFORM, "unknown init scheme");
  return init == TLM_INIT_UNIFORM ? InitScheme::kUniform : InitScheme::kPositive;
}

TrainConfig to_config(const tlm_train_config& c) {
  TrainConfig t;
  t.epochs = c.epochs;
  t.learning_rate = c.learning_rate;
  t.clip_norm = c.clip_norm;
  t.batch_size = c.batch_size;
  t.seq_len = c.seq_len;
  t.hidden_size = c.hidden_size;
  t.embed_size = c.embed_size;
  t.seed = c.seed;
  t.rescale_hidden = c.rescale_hidden != 0;
  t.cell = to_cell(c.cell);
  t.init = to_init(c.init);
  t.init_scale = c.init_scale;
  t.validate();
  return t;
}

tlm_eval_report to_report(const EvalReport& r, double oov) {
  return {r.tokens, r.mean_nll, r.perplexity, oov};
}

}  // namespace

extern "C" {

const char* tlm_status_string(tlm_status status) {
  switch (status) {
    case TLM_OK: return "ok";
    case TLM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TLM_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case TLM_ERR_RESOURCE_LIMIT: return "resource limit";
    case TLM_ERR_UNSEEN_CONTEXT: return "unseen context";
    case TLM_ERR_NUMERICAL: return "numerical failure";
    case TLM_ERR_IO: return "i/o error";
    case TLM_ERR_FORMAT: return "format error";
    case TLM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tlm_last_error(void) { return g_last_error.c_str(); }

const char* tlm_version(void) { return "0.1.0"; }

tlm_status tlm_corpus_load(const char* train_path, const char* valid_path,
                           const char* test_path, size_t vocab_limit, tlm_corpus** out) {
  return guarded([&] {
    require(out != nullptr, "null output pointer");
    *out = nullptr;
    require(train_path != nullptr && valid_path != nullptr, "train and valid paths are required");
    VocabOptions opts;
    opts.max_size = vocab_limit;
    auto c = std::make_unique<tlm_corpus>();
    c->corpus = load_corpus(train_path, valid_path, test_path ? test_path : "", opts);
    *out = c.release();
  });
}

tlm_status tlm_corpus_get_info(const tlm_corpus* corpus, tlm_corpus_info* out) {
  return guarded([&] {
    require(corpus != nullptr && out != nullptr, "null argument");
    const Corpus& c = corpus->corpus;
    *out = {c.vocab.size(), c.train.size(), c.valid.size(), c.test.size(), oov_rate(c.valid),
            oov_rate(c.test)};
  });
}

void tlm_corpus_free(tlm_corpus* corpus) { delete corpus; }

void tlm_train_config_init(tlm_train_config* config, tlm_cell cell) {
  if (config == nullptr) return;
  const TrainConfig t =
      TrainConfig::for_cell(cell == TLM_CELL_RNN ? CellKind::kAdditive : CellKind::kMultiplicative);
  config->epochs = t.epochs;
  config->learning_rate = t.learning_rate;
  config->clip_norm = t.clip_norm;
  config->batch_size = t.batch_size;
  config->seq_len = t.seq_len;
  config->hidden_size = t.hidden_size;
  config->embed_size = t.embed_size;
  config->seed = t.seed;
  config->rescale_hidden = t.rescale_hidden ? 1 : 0;
  config->cell = cell == TLM_CELL_RNN ? TLM_CELL_RNN : TLM_CELL_TSLM;
  config->init = t.init == InitScheme::kUniform ? TLM_INIT_UNIFORM : TLM_INIT_POSITIVE;
  config->init_scale = t.init_scale;
}

tlm_status tlm_train(const tlm_corpus* corpus, const tlm_train_config* config,
                     tlm_epoch_callback callback, void* user_data, tlm_model** out) {
  return guarded([&] {
    require(corpus != nullptr && config != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    const TrainConfig cfg = to_config(*config);
    EpochCallback cb;
    if (callback != nullptr) {
      cb = [&](const EpochMetrics& m) {
        const tlm_epoch_metrics cm{m.epoch, m.train_ppl, m.valid_ppl, m.seconds, m.learning_rate};
        callback(&cm, user_data);
      };
    }
    const Corpus& c = corpus->corpus;
    TrainResult res = train(c.vocab.size(), c.train, c.valid, cfg, cb);
    auto model = std::make_unique<tlm_model>();
    model->params = std::move(res.params);
    model->vocab = c.vocab;
    model->options = cfg.model_options();
    *out = model.release();
  });
}

tlm_status tlm_model_create(const char* const* tokens, size_t n_tokens, size_t embed_size,
                            size_t hidden_size, tlm_init init, double init_scale, uint64_t seed,
                            tlm_model** out) {
  return guarded([&] {
    require(out != nullptr, "null output pointer");
    *out = nullptr;
    require(tokens != nullptr || n_tokens == 0, "null token list");
    require(init_scale > 0.0, "init scale must be positive");
    std::vector<std::string> list;
    list.reserve(n_tokens);
    for (size_t i = 0; i < n_tokens; ++i) {
      require(tokens[i] != nullptr, "null token");
      list.emplace_back(tokens[i]);
    }
    auto model = std::make_unique<tlm_model>();
    model->vocab = Vocab(std::move(list));
    model->params = TslmParams::initialize(to_init(init), model->vocab.size(), embed_size,
                                           hidden_size, init_scale, seed);
    model->options = {CellKind::kMultiplicative, true};
    *out = model.release();
  });
}

tlm_status tlm_model_load(const char* path, tlm_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    Checkpoint ck = load_checkpoint(path);
    auto model = std::make_unique<tlm_model>();
    model->params = std::move(ck.params);
    model->vocab = std::move(ck.vocab);
    model->options = {CellKind::kMultiplicative, true};
    *out = model.release();
  });
}

tlm_status tlm_model_save(const tlm_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "null argument");
    require(model->options.cell == CellKind::kMultiplicative,
            "checkpoints store the multiplicative cell only");
    save_checkpoint(path, model->params, model->vocab);
  });
}

void tlm_model_free(tlm_model* model) { delete model; }

tlm_status tlm_model_get_info(const tlm_model* model, tlm_model_info* out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    const TslmParams& p = model->params;
    *out = {p.vocab_size(),
            p.embed_size(),
            p.hidden_size(),
            p.parameter_count(),
            model->options.cell == CellKind::kAdditive ? TLM_CELL_RNN : TLM_CELL_TSLM,
            model->options.rescale_hidden ? 1 : 0};
  });
}

tlm_status tlm_model_set_rescale(tlm_model* model, int rescale_hidden) {
  return guarded([&] {
    require(model != nullptr, "null model");
    model->options.rescale_hidden = rescale_hidden != 0;
  });
}

tlm_status tlm_model_token_id(const tlm_model* model, const char* token, uint32_t* out) {
  return guarded([&] {
    require(model != nullptr && token != nullptr && out != nullptr, "null argument");
    *out = model->vocab.id(token);
  });
}

tlm_status tlm_model_eval_ids(const tlm_model* model, const uint32_t* ids, size_t n,
                              tlm_eval_report* out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    require(ids != nullptr || n == 0, "null id array");
    TokenSeq seq;
    seq.ids.assign(ids, ids + n);
    for (TokenId id : seq.ids) require(id < model->vocab.size(), "token id out of range");
    *out = to_report(perplexity(model->params, seq, model->options), oov_rate(seq));
  });
}

tlm_status tlm_model_eval_file(const tlm_model* model, const char* path, tlm_eval_report* out) {
  return guarded([&] {
    require(model != nullptr && path != nullptr && out != nullptr, "null argument");
    const TokenSeq seq = encode(read_text_file(path), model->vocab);
    *out = to_report(perplexity(model->params, seq, model->options), oov_rate(seq));
  });
}

tlm_status tlm_model_next_distribution(const tlm_model* model, const uint32_t* prefix, size_t n,
                                       double* probs, size_t capacity) {
  return guarded([&] {
    require(model != nullptr && probs != nullptr, "null argument");
    require(prefix != nullptr && n > 0, "prefix must be nonempty");
    require(capacity >= model->vocab.size(), "probability buffer too small");
    std::vector<TokenId> ids(prefix, prefix + n);
    for (TokenId id : ids) require(id < model->vocab.size(), "token id out of range");
    const Vector p = conditional_distribution(model->params, ids, model->options);
    std::copy(p.begin(), p.end(), probs);
  });
}

tlm_status tlm_baseline_ngram(const tlm_corpus* corpus, int split, size_t n, double add_k,
                              tlm_eval_report* out) {
  return guarded([&] {
    require(corpus != nullptr && out != nullptr, "null argument");
    require(split == 0 || split == 1, "split must be 0 (valid) or 1 (test)");
    const Corpus& c = corpus->corpus;
    const TokenSeq& eval = split == 0 ? c.valid : c.test;
    *out = to_report(baseline_ngram(c.train, eval, c.vocab.size(), n, add_k,
                                    split == 0 ? "valid" : "test"),
                     oov_rate(eval));
  });
}

tlm_status tlm_oracle_check(const char* path, size_t n, size_t vocab_limit,
                            tlm_oracle_report* out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    require(n >= 1, "n must be at least 1");
    const std::string text = read_text_file(path);
    VocabOptions opts;
    opts.max_size = vocab_limit;
    const Vocab vocab = build_vocab(text, opts);
    const auto sentences = encode_sentences(text, vocab);
    const auto windows = sentence_windows(sentences, n);
    if (windows.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "no line has " + std::to_string(n) + " or more tokens");
    }
    const NgramIdentityReport r = verify_ngram_identities(windows, vocab.size(), n);
    *out = {vocab.size(),         r.windows,
            r.distinct_windows,   r.window_max_dev,
            r.marginal_max_dev,   r.conditional_max_dev,
            r.chain_rule_max_dev, r.orthogonality_max_dev,
            r.max_dev()};
  });
}

tlm_status tlm_equivalence_check(size_t embed_size, size_t hidden_size, size_t vocab_size,
                                 size_t t, size_t trials, uint64_t seed, double* max_dev) {
  return guarded([&] {
    require(max_dev != nullptr, "null output pointer");
    require(t >= 2, "t must be at least 2");
    require(trials >= 1, "trials must be at least 1");
    require(embed_size >= 1 && hidden_size >= 1 && vocab_size >= 1, "dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab_size - 1));
    std::uniform_real_distribution<double> h0(-1.0, 1.0);
    double worst = 0.0;
    for (size_t k = 0; k < trials; ++k) {
      TslmParams p = TslmParams::random(vocab_size, embed_size, hidden_size, 1.0, rng());
      for (double& x : p.h0_pre) x = h0(rng);
      std::vector<TokenId> prefix(t - 1);
      for (TokenId& id : prefix) id = tok(rng);
      worst = std::max(worst, contraction_max_deviation(p, prefix));
    }
    *max_dev = worst;
  });
}

tlm_status tlm_decompose_demo(size_t order, size_t dim, size_t max_rank, uint64_t seed,
                              tlm_decompose_row* rows, size_t capacity) {
  return guarded([&] {
    require(rows != nullptr, "null row buffer");
    require(order >= 2, "order must be at least 2");
    require(max_rank >= 1 && max_rank <= dim, "rank must be in [1, dim]");
    require(capacity >= max_rank, "row buffer too small");
    DenseTensor t = DenseTensor::zeros(Shape(order, dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (double& x : t.data()) x = normal(rng);
    const double norm = std::sqrt(inner_product(t, t));
    for (size_t r = 1; r <= max_rank; ++r) {
      const DecompChain chain = recursive_decompose(t, r);
      const DenseTensor rec = reconstruct(chain, order);
      double sq = 0.0;
      for (size_t i = 0; i < t.size(); ++i) {
        const double d = t.data()[i] - rec.data()[i];
        sq += d * d;
      }
      const double err = std::sqrt(sq);
      rows[r - 1] = {r, err, norm > 0.0 ? err / norm : 0.0, chain.total_discarded_energy()};
    }
  });
}

tlm_status tlm_sweep(const tlm_corpus* corpus, const tlm_train_config* base,
                     tlm_sweep_param param, const size_t* values, size_t n_values,
                     tlm_sweep_row* rows) {
  return guarded([&] {
    require(corpus != nullptr && base != nullptr && rows != nullptr, "null argument");
    require(values != nullptr && n_values > 0, "sweep needs at least one value");
    require(param == TLM_SWEEP_SEQ_LEN || param == TLM_SWEEP_HIDDEN_SIZE, "unknown sweep parameter");
    const TrainConfig cfg = to_config(*base);
    const std::vector<size_t> vals(values, values + n_values);
    const auto result =
        sweep(corpus->corpus, cfg,
              param == TLM_SWEEP_SEQ_LEN ? SweepParam::kSeqLen : SweepParam::kHiddenSize, vals);
    for (size_t i = 0; i < result.size(); ++i)
      rows[i] = {result[i].value, result[i].valid_ppl, result[i].test_ppl};
  });
}

}  // extern "C"
