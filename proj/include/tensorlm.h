/* SPDX-License-Identifier: Apache-2.0 */
#ifndef TENSORLM_H
#define TENSORLM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TENSORLM_BUILDING_LIBRARY)
#    define TLM_API __declspec(dllexport)
#  else
#    define TLM_API __declspec(dllimport)
#  endif
#else
#  define TLM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tlm_status {
  TLM_OK = 0,
  TLM_ERR_INVALID_ARGUMENT = 1,
  TLM_ERR_SHAPE_MISMATCH = 2,
  TLM_ERR_RESOURCE_LIMIT = 3,
  TLM_ERR_UNSEEN_CONTEXT = 4,
  TLM_ERR_NUMERICAL = 5,
  TLM_ERR_IO = 6,
  TLM_ERR_FORMAT = 7,
  TLM_ERR_INTERNAL = 8
} tlm_status;

/* Static name of a status code, e.g. "invalid argument". */
TLM_API const char* tlm_status_string(tlm_status status);

/* Message of the most recent failure on the calling thread; "" if none. */
TLM_API const char* tlm_last_error(void);

TLM_API const char* tlm_version(void);

typedef enum tlm_cell {
  TLM_CELL_TSLM = 0, /* h = (W h) * (U a), elementwise */
  TLM_CELL_RNN = 1   /* h = tanh(W h + U a) */
} tlm_cell;

typedef enum tlm_init {
  TLM_INIT_POSITIVE = 0,
  TLM_INIT_UNIFORM = 1
} tlm_init;

/* ---- corpus ---------------------------------------------------------- */

typedef struct tlm_corpus tlm_corpus;

typedef struct tlm_corpus_info {
  size_t vocab_size;
  size_t train_tokens;
  size_t valid_tokens;
  size_t test_tokens;
  double valid_oov_rate;
  double test_oov_rate;
} tlm_corpus_info;

/* Vocabulary comes from the training file. test_path may be NULL.
   vocab_limit caps the vocabulary size including <unk> and <eos>; 0 means
   no cap. */
TLM_API tlm_status tlm_corpus_load(const char* train_path, const char* valid_path,
                                   const char* test_path, size_t vocab_limit,
                                   tlm_corpus** out);
TLM_API tlm_status tlm_corpus_get_info(const tlm_corpus* corpus, tlm_corpus_info* out);
TLM_API void tlm_corpus_free(tlm_corpus* corpus);

/* ---- training -------------------------------------------------------- */

typedef struct tlm_train_config {
  size_t epochs;
  double learning_rate;
  double clip_norm;
  size_t batch_size;
  size_t seq_len;
  size_t hidden_size;
  size_t embed_size;
  uint64_t seed;
  int rescale_hidden;
  tlm_cell cell;
  tlm_init init;
  double init_scale;
} tlm_train_config;

/* Defaults for the given cell. */
TLM_API void tlm_train_config_init(tlm_train_config* config, tlm_cell cell);

typedef struct tlm_epoch_metrics {
  size_t epoch;
  double train_ppl;
  double valid_ppl;
  double seconds;
  double learning_rate;
} tlm_epoch_metrics;

typedef void (*tlm_epoch_callback)(const tlm_epoch_metrics* metrics, void* user_data);

typedef struct tlm_model tlm_model;

/* Trains on the corpus and returns the parameters with the best validation
   perplexity. The callback, if any, runs after every epoch. */
TLM_API tlm_status tlm_train(const tlm_corpus* corpus, const tlm_train_config* config,
                             tlm_epoch_callback callback, void* user_data, tlm_model** out);

/* ---- models ---------------------------------------------------------- */

typedef struct tlm_model_info {
  size_t vocab_size;
  size_t embed_size;
  size_t hidden_size;
  size_t parameter_count;
  tlm_cell cell;
  int rescale_hidden;
} tlm_model_info;

/* tokens[0] and tokens[1] must be "<unk>" and "<eos>". */
TLM_API tlm_status tlm_model_create(const char* const* tokens, size_t n_tokens,
                                    size_t embed_size, size_t hidden_size, tlm_init init,
                                    double init_scale, uint64_t seed, tlm_model** out);

/* Checkpoints hold the multiplicative cell; loaded models rescale hidden
   states unless changed with tlm_model_set_rescale. */
TLM_API tlm_status tlm_model_load(const char* path, tlm_model** out);
TLM_API tlm_status tlm_model_save(const tlm_model* model, const char* path);
TLM_API void tlm_model_free(tlm_model* model);

TLM_API tlm_status tlm_model_get_info(const tlm_model* model, tlm_model_info* out);
TLM_API tlm_status tlm_model_set_rescale(tlm_model* model, int rescale_hidden);

/* Id of a token, or the <unk> id when the token is unknown. */
TLM_API tlm_status tlm_model_token_id(const tlm_model* model, const char* token,
                                      uint32_t* out);

typedef struct tlm_eval_report {
  size_t tokens; /* scored positions */
  double mean_nll;
  double perplexity;
  double oov_rate;
} tlm_eval_report;

TLM_API tlm_status tlm_model_eval_ids(const tlm_model* model, const uint32_t* ids, size_t n,
                                      tlm_eval_report* out);
TLM_API tlm_status tlm_model_eval_file(const tlm_model* model, const char* path,
                                       tlm_eval_report* out);

/* Writes the distribution over the token after `prefix` into probs, which
   must hold vocab_size entries. */
TLM_API tlm_status tlm_model_next_distribution(const tlm_model* model, const uint32_t* prefix,
                                               size_t n, double* probs, size_t capacity);

/* Add-k n-gram baseline (n in 1..3) trained on the train split and scored on
   the valid (split = 0) or test (split = 1) split. */
TLM_API tlm_status tlm_baseline_ngram(const tlm_corpus* corpus, int split, size_t n,
                                      double add_k, tlm_eval_report* out);

/* ---- checks and demos ------------------------------------------------ */

typedef struct tlm_oracle_report {
  size_t vocab_size;
  size_t windows;
  size_t distinct_windows;
  double sentence_dev;
  double prefix_dev;
  double conditional_dev;
  double chain_rule_dev;
  double orthogonality_dev;
  double max_dev;
} tlm_oracle_report;

/* Builds the dense n-gram joint from the length-n windows of every line of
   the file and compares the tensor quantities against counting. */
TLM_API tlm_status tlm_oracle_check(const char* path, size_t n, size_t vocab_limit,
                                    tlm_oracle_report* out);

/* Largest elementwise gap between V h_{t-1} from the recurrence and the full
   parameter-tensor contraction, over `trials` random models and prefixes. */
TLM_API tlm_status tlm_equivalence_check(size_t embed_size, size_t hidden_size,
                                         size_t vocab_size, size_t t, size_t trials,
                                         uint64_t seed, double* max_dev);

typedef struct tlm_decompose_row {
  size_t rank;
  double abs_error;      /* Frobenius norm of the residual */
  double rel_error;      /* abs_error / Frobenius norm of the tensor */
  double discarded_energy;
} tlm_decompose_row;

/* Decomposes one random order/dim tensor at ranks 1..max_rank; rows must hold
   max_rank entries. */
TLM_API tlm_status tlm_decompose_demo(size_t order, size_t dim, size_t max_rank, uint64_t seed,
                                      tlm_decompose_row* rows, size_t capacity);

typedef enum tlm_sweep_param {
  TLM_SWEEP_SEQ_LEN = 0,
  TLM_SWEEP_HIDDEN_SIZE = 1
} tlm_sweep_param;

typedef struct tlm_sweep_row {
  size_t value;
  double valid_ppl;
  double test_ppl;
} tlm_sweep_row;

/* Retrains once per value; rows must hold n_values entries. */
TLM_API tlm_status tlm_sweep(const tlm_corpus* corpus, const tlm_train_config* base,
                             tlm_sweep_param param, const size_t* values, size_t n_values,
                             tlm_sweep_row* rows);

#ifdef __cplusplus
}
#endif

#endif
