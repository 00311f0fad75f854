// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "tensorlm/ngram_bridge.hpp"
#include "tensorlm/tensor.hpp"

namespace tensorlm {

/// How the transformed previous state p = W·h_{t-1} and the transformed input
/// a = U·α_t are combined into h_t.
enum class CellKind {
  kMultiplicative,  // h = p ⊙ a
  kAdditive,        // h = tanh(p + a), the reference RNN cell
};

enum class InitScheme {
  kUniform,   // every matrix uniform in (-scale, scale)
  kPositive,  // embed, U and W nonnegative, W centered on the averaging matrix
};

/// Trainable parameters. Embedding rows are the per-token input vectors α.
/// h0_pre stands in for W·h_0 at the first step, so W is never inverted; it
/// defaults to the identity element of the cell (ones for ⊙, zeros for +).
struct TslmParams {
  Matrix embed;   // |V| × m
  Matrix u_mat;   // r × m
  Matrix w_mat;   // r × r
  Matrix v_mat;   // |V| × r
  Vector h0_pre;  // r

  std::size_t vocab_size() const noexcept { return embed.rows; }
  std::size_t embed_size() const noexcept { return embed.cols; }
  std::size_t hidden_size() const noexcept { return u_mat.rows; }
  std::size_t parameter_count() const noexcept;

  /// Throws kShapeMismatch / kNumerical if dimensions disagree or any entry is
  /// non-finite.
  void validate() const;

  static TslmParams zeros(std::size_t vocab, std::size_t embed, std::size_t hidden);

  /// All matrices uniform in (-scale, scale); h0_pre set to the cell's
  /// identity element.
  static TslmParams random(std::size_t vocab, std::size_t embed, std::size_t hidden,
                           double scale, std::uint64_t seed,
                           CellKind cell = CellKind::kMultiplicative);

  /// embed and U are |uniform(-scale, scale)|, W is 1/r + |uniform(-scale,
  /// scale)|, V is uniform(-scale, scale) and h0_pre is all ones. Every hidden
  /// state of the multiplicative cell starts out positive.
  static TslmParams positive(std::size_t vocab, std::size_t embed, std::size_t hidden,
                             double scale, std::uint64_t seed);

  static TslmParams initialize(InitScheme scheme, std::size_t vocab, std::size_t embed,
                               std::size_t hidden, double scale, std::uint64_t seed,
                               CellKind cell = CellKind::kMultiplicative);

  std::array<std::span<double>, 5> tensors();
  std::array<std::span<const double>, 5> tensors() const;

  friend bool operator==(const TslmParams&, const TslmParams&) = default;
};

/// ∂loss/∂θ with the same layout as TslmParams.
using Gradients = TslmParams;

struct ModelOptions {
  CellKind cell = CellKind::kMultiplicative;
  /// Multiplicative cell only: divide each h_t by its max-norm and predict
  /// from the normalized state. The exact state is exp(log_scale_t)·h_t.
  bool rescale_hidden = false;
};

/// Hidden state carried between consecutive segments of a stream. A fresh
/// state means the next step uses h0_pre in place of W·h.
struct HiddenState {
  bool fresh = true;
  Vector h;
  double log_scale = 0.0;

  static HiddenState start() { return {}; }
};

struct ForwardTrace {
  std::vector<TokenId> inputs;
  std::vector<Vector> hiddens;    // h_t, normalized when rescaling
  std::vector<Vector> logits;     // V·h_t
  std::vector<Vector> log_probs;  // log-softmax(logits_t), distribution of token t+1
  Vector log_scales;              // cumulative log of the rescaling factors
  HiddenState end_state;
};

/// h_1 from the fresh state: h0_pre combined with U·α_token.
Vector forward_step(const TslmParams& params, TokenId token,
                    CellKind cell = CellKind::kMultiplicative);
/// h_t from h_{t-1}.
Vector forward_step(const TslmParams& params, std::span<const double> h_prev, TokenId token,
                    CellKind cell = CellKind::kMultiplicative);

/// h_t consumes α_1..α_t; log_probs[t] is the model's distribution for the
/// token following ids[t].
ForwardTrace forward_sequence(const TslmParams& params, std::span<const TokenId> ids,
                              const ModelOptions& options = {},
                              const HiddenState& start = HiddenState::start());

/// Materializes the order-t parameter tensor of shape m^(t-1) × |V| whose
/// contraction with α_1 ⊗ … ⊗ α_{t-1} over the leading modes gives V·h_{t-1}
/// for the exact multiplicative model. Requires t >= 2 and
/// m^(t-1)·|V| within the dense entry limit.
DenseTensor build_param_tensor(const TslmParams& params, std::size_t t);

/// Largest elementwise |V·h_{t-1} - ⟨T(t), α_1 ⊗ … ⊗ α_{t-1}⟩| for the exact
/// multiplicative model, where t - 1 = |prefix|; the left side comes from the
/// recurrence and the right side from build_param_tensor.
double contraction_max_deviation(const TslmParams& params, std::span<const TokenId> prefix);

/// softmax(V·h_{|prefix|}); prefix must be nonempty.
Vector conditional_distribution(const TslmParams& params, std::span<const TokenId> prefix,
                                const ModelOptions& options = {});

Vector softmax(std::span<const double> logits);
Vector log_softmax(std::span<const double> logits);

struct LossResult {
  double loss = 0.0;  // mean cross-entropy over the sequence
  Gradients grads;
  HiddenState end_state;
};

/// Mean token cross-entropy of predicting targets[t] after ids[0..t], with
/// hand-derived BPTT gradients. Gradients stop at `start` (truncated BPTT).
LossResult loss_and_gradients(const TslmParams& params, std::span<const TokenId> ids,
                              std::span<const TokenId> targets,
                              const ModelOptions& options = {},
                              const HiddenState& start = HiddenState::start());

/// Adds scale·∂(Σ_t CE_t)/∂θ into `grads` and returns Σ_t CE_t. The building
/// block for batched training; `end_state` receives the last hidden state.
double accumulate_gradients(const TslmParams& params, std::span<const TokenId> ids,
                            std::span<const TokenId> targets, const ModelOptions& options,
                            const HiddenState& start, double scale, Gradients& grads,
                            HiddenState* end_state = nullptr);

}  // namespace tensorlm
