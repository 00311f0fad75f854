// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tensorlm/corpus.hpp"
#include "tensorlm/tslm_model.hpp"

namespace tensorlm {

/// Defaults suit the multiplicative cell; for_cell gives the additive cell
/// its own.
struct TrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 0.2;
  double clip_norm = 5.0;
  std::size_t batch_size = 20;
  std::size_t seq_len = 30;  // BPTT length, the tensor order n
  std::size_t hidden_size = 256;
  std::size_t embed_size = 256;
  std::uint64_t seed = 1234;
  bool rescale_hidden = true;
  CellKind cell = CellKind::kMultiplicative;
  InitScheme init = InitScheme::kPositive;
  double init_scale = 0.3;

  /// Multiplicative: positive init, scale 0.3, rate 0.2. Additive: uniform
  /// init, scale 0.08, rate 1.
  static TrainConfig for_cell(CellKind cell);

  /// Throws kInvalidArgument unless every size, rate and norm is positive.
  void validate() const;
  ModelOptions model_options() const { return {cell, rescale_hidden}; }
};

/// perplexity == exp(mean_nll) exactly, as computed.
struct EvalReport {
  std::string split;
  std::size_t tokens = 0;
  double mean_nll = 0.0;
  double perplexity = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
  double seconds = 0.0;
  double learning_rate = 0.0;  // rate used during this epoch
};

struct TrainResult {
  TslmParams params;  // parameters with the best validation PPL seen, initial included
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch beat the initial parameters
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Builds an EvalReport from per-token log-probabilities (natural log). A
/// -inf entry makes the perplexity +inf.
EvalReport report_from_log_probs(std::string split, std::span<const double> log_probs);

/// Scores tokens 1..N-1 of the stream, each conditioned on everything before
/// it, carrying the hidden state from a fresh start.
std::vector<double> token_log_probs(const TslmParams& params, const TokenSeq& seq,
                                    const ModelOptions& options);

EvalReport perplexity(const TslmParams& params, const TokenSeq& seq,
                      const ModelOptions& options = {}, std::string split = "eval");

/// Scales grads in place so their global L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_gradients(Gradients& grads, double max_norm);

/// Truncated-BPTT SGD over contiguous batches with hidden state carried across
/// batches and global-norm clipping. An epoch that does not improve the
/// validation perplexity is rolled back to the best parameters so far and the
/// learning rate is halved. An empty valid_seq disables validation: the rate
/// stays fixed, valid_ppl is NaN and the final parameters are returned.
/// Deterministic for a fixed config.
/// Throws kNumerical when the training loss becomes non-finite.
TrainResult train(const TslmParams& init, const TokenSeq& train_seq, const TokenSeq& valid_seq,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Initializes parameters from the config and trains.
TrainResult train(std::size_t vocab_size, const TokenSeq& train_seq, const TokenSeq& valid_seq,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Add-k smoothed n-gram baseline (n in 1..3) trained on one stream and scored
/// on the same positions as the recurrent model (tokens 1..N-1); contexts that
/// reach past the start of the stream use the tokens available. add_k = 0
/// gives the unsmoothed MLE, whose perplexity is +inf on unseen events.
EvalReport baseline_ngram(const TokenSeq& train_seq, const TokenSeq& eval_seq,
                          std::size_t vocab_size, std::size_t n, double add_k,
                          std::string split = "eval");

enum class SweepParam { kSeqLen, kHiddenSize };

struct SweepRow {
  std::size_t value = 0;
  double valid_ppl = 0.0;
  double test_ppl = 0.0;
};

/// Retrains once per value. kHiddenSize sets both the hidden and the
/// embedding size, kSeqLen sets the BPTT length. test_ppl is NaN when the
/// corpus has no test split.
std::vector<SweepRow> sweep(const Corpus& corpus, const TrainConfig& base, SweepParam param,
                            std::span<const std::size_t> values);

}  // namespace tensorlm
