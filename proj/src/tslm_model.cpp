// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/tslm_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "tensorlm/decomposition.hpp"

namespace tensorlm {

namespace {

double cell_identity(CellKind cell) { return cell == CellKind::kMultiplicative ? 1.0 : 0.0; }

void check_token(const TslmParams& p, TokenId id) {
  if (id >= p.vocab_size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(p.vocab_size()));
  }
}

Vector input_projection(const TslmParams& p, TokenId token) {
  check_token(p, token);
  return matvec(p.u_mat, p.embed.row(token));
}

Vector combine(std::span<const double> pre, std::span<const double> in, CellKind cell) {
  Vector h(pre.size());
  if (cell == CellKind::kMultiplicative) {
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = pre[i] * in[i];
  } else {
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(pre[i] + in[i]);
  }
  return h;
}

// Position of the largest |x|; first on ties.
std::size_t argmax_abs(std::span<const double> x) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (std::abs(x[i]) > std::abs(x[arg])) arg = i;
  return arg;
}

// Everything the backward pass needs from one step.
struct StepCache {
  Vector pre;    // W·h_{t-1} (or h0_pre)
  Vector in;     // U·α_t
  Vector raw;    // combined state before rescaling
  double scale;  // max-norm divisor, 1 when not rescaling
  Vector h;
  Vector probs;
};

bool rescaling(const ModelOptions& o) {
  return o.rescale_hidden && o.cell == CellKind::kMultiplicative;
}

// Runs the recurrence and fills caches; returns the final state.
HiddenState run_forward(const TslmParams& p, std::span<const TokenId> ids,
                        const ModelOptions& options, const HiddenState& start,
                        std::vector<StepCache>& steps, Vector* log_scales) {
  HiddenState state = start;
  steps.resize(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    StepCache& s = steps[t];
    s.pre = state.fresh ? p.h0_pre : matvec(p.w_mat, state.h);
    s.in = input_projection(p, ids[t]);
    s.raw = combine(s.pre, s.in, options.cell);
    s.scale = 1.0;
    if (rescaling(options)) {
      const double mx = std::abs(s.raw[argmax_abs(s.raw)]);
      if (mx > 0.0) s.scale = mx;
    }
    s.h = s.raw;
    if (s.scale != 1.0)
      for (double& v : s.h) v /= s.scale;
    state.fresh = false;
    state.h = s.h;
    state.log_scale += std::log(s.scale);
    if (log_scales) log_scales->push_back(state.log_scale);
  }
  return state;
}

}  // namespace

std::size_t TslmParams::parameter_count() const noexcept {
  return embed.data.size() + u_mat.data.size() + w_mat.data.size() + v_mat.data.size() +
         h0_pre.size();
}

void TslmParams::validate() const {
  const std::size_t m = embed.cols;
  const std::size_t r = u_mat.rows;
  if (embed.rows == 0 || m == 0 || r == 0 || u_mat.cols != m || w_mat.rows != r ||
      w_mat.cols != r || v_mat.rows != embed.rows || v_mat.cols != r || h0_pre.size() != r) {
    throw Error(ErrorCode::kShapeMismatch, "TslmParams dimensions are inconsistent");
  }
  for (auto t : tensors()) {
    for (double x : t) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kNumerical, "TslmParams has non-finite entries");
    }
  }
}

TslmParams TslmParams::zeros(std::size_t vocab, std::size_t embed, std::size_t hidden) {
  TslmParams p;
  p.embed = Matrix(vocab, embed);
  p.u_mat = Matrix(hidden, embed);
  p.w_mat = Matrix(hidden, hidden);
  p.v_mat = Matrix(vocab, hidden);
  p.h0_pre = Vector(hidden, 0.0);
  return p;
}

TslmParams TslmParams::random(std::size_t vocab, std::size_t embed, std::size_t hidden,
                              double scale, std::uint64_t seed, CellKind cell) {
  if (vocab == 0 || embed == 0 || hidden == 0) {
    throw Error(ErrorCode::kInvalidArgument, "model dimensions must be positive");
  }
  TslmParams p = zeros(vocab, embed, hidden);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Matrix* m : {&p.embed, &p.u_mat, &p.w_mat, &p.v_mat})
    for (double& x : m->data) x = dist(rng);
  std::fill(p.h0_pre.begin(), p.h0_pre.end(), cell_identity(cell));
  return p;
}

TslmParams TslmParams::positive(std::size_t vocab, std::size_t embed, std::size_t hidden,
                                double scale, std::uint64_t seed) {
  TslmParams p = random(vocab, embed, hidden, scale, seed, CellKind::kMultiplicative);
  for (Matrix* m : {&p.embed, &p.u_mat, &p.w_mat})
    for (double& x : m->data) x = std::abs(x);
  const double mean = 1.0 / static_cast<double>(hidden);
  for (double& x : p.w_mat.data) x += mean;
  return p;
}

TslmParams TslmParams::initialize(InitScheme scheme, std::size_t vocab, std::size_t embed,
                                  std::size_t hidden, double scale, std::uint64_t seed,
                                  CellKind cell) {
  if (scheme == InitScheme::kPositive) return positive(vocab, embed, hidden, scale, seed);
  return random(vocab, embed, hidden, scale, seed, cell);
}

std::array<std::span<double>, 5> TslmParams::tensors() {
  return {std::span<double>(embed.data), std::span<double>(u_mat.data),
          std::span<double>(w_mat.data), std::span<double>(v_mat.data),
          std::span<double>(h0_pre)};
}

std::array<std::span<const double>, 5> TslmParams::tensors() const {
  return {std::span<const double>(embed.data), std::span<const double>(u_mat.data),
          std::span<const double>(w_mat.data), std::span<const double>(v_mat.data),
          std::span<const double>(h0_pre)};
}

Vector forward_step(const TslmParams& params, TokenId token, CellKind cell) {
  return combine(params.h0_pre, input_projection(params, token), cell);
}

Vector forward_step(const TslmParams& params, std::span<const double> h_prev, TokenId token,
                    CellKind cell) {
  return combine(matvec(params.w_mat, h_prev), input_projection(params, token), cell);
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

Vector log_softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : out) v -= lse;
  return out;
}

ForwardTrace forward_sequence(const TslmParams& params, std::span<const TokenId> ids,
                              const ModelOptions& options, const HiddenState& start) {
  if (ids.empty()) throw Error(ErrorCode::kInvalidArgument, "forward_sequence needs T >= 1");
  std::vector<StepCache> steps;
  ForwardTrace trace;
  trace.inputs.assign(ids.begin(), ids.end());
  trace.end_state = run_forward(params, ids, options, start, steps, &trace.log_scales);
  for (auto& s : steps) {
    trace.logits.push_back(matvec(params.v_mat, s.h));
    trace.log_probs.push_back(log_softmax(trace.logits.back()));
    trace.hiddens.push_back(std::move(s.h));
  }
  return trace;
}

DenseTensor build_param_tensor(const TslmParams& params, std::size_t t) {
  if (t < 2) throw Error(ErrorCode::kInvalidArgument, "build_param_tensor needs t >= 2");
  const std::size_t m = params.embed_size();
  const std::size_t r = params.hidden_size();
  const std::size_t vocab = params.vocab_size();
  Shape shape(t - 1, m);
  shape.push_back(vocab);
  checked_entry_count(shape);

  // Rows of `states` are S(t-1)_i expanded with the shared U and W; the
  // top-level weights are unused here.
  const Vector unit(r, 1.0);
  const Matrix states =
      expand_states(shared_chain(params.u_mat, params.w_mat, unit, params.h0_pre, t - 1));
  const std::size_t lead = states.cols;

  std::vector<double> data(lead * m * vocab, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t a = 0; a < lead; ++a) {
      const double s = states(i, a);
      if (s == 0.0) continue;
      for (std::size_t d = 0; d < m; ++d) {
        const double su = s * params.u_mat(i, d);
        double* out = data.data() + (a * m + d) * vocab;
        for (std::size_t k = 0; k < vocab; ++k) out[k] += params.v_mat(k, i) * su;
      }
    }
  }
  return DenseTensor(std::move(shape), std::move(data));
}

double contraction_max_deviation(const TslmParams& params, std::span<const TokenId> prefix) {
  if (prefix.empty()) throw Error(ErrorCode::kInvalidArgument, "contraction check needs t >= 2");
  const ForwardTrace trace = forward_sequence(params, prefix);
  const DenseTensor tensor = build_param_tensor(params, prefix.size() + 1);
  std::vector<Vector> alphas;
  for (TokenId id : prefix) alphas.emplace_back(params.embed.row(id).begin(), params.embed.row(id).end());
  const Vector contracted = contract_leading(tensor, alphas);
  double dev = 0.0;
  for (std::size_t k = 0; k < contracted.size(); ++k)
    dev = std::max(dev, std::abs(contracted[k] - trace.logits.back()[k]));
  return dev;
}

Vector conditional_distribution(const TslmParams& params, std::span<const TokenId> prefix,
                                const ModelOptions& options) {
  if (prefix.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "conditional_distribution needs a nonempty prefix");
  }
  std::vector<StepCache> steps;
  const HiddenState end = run_forward(params, prefix, options, HiddenState::start(), steps, nullptr);
  return softmax(matvec(params.v_mat, end.h));
}

double accumulate_gradients(const TslmParams& p, std::span<const TokenId> ids,
                            std::span<const TokenId> targets, const ModelOptions& options,
                            const HiddenState& start, double scale, Gradients& g,
                            HiddenState* end_state) {
  if (ids.size() != targets.size()) {
    throw Error(ErrorCode::kInvalidArgument, "ids and targets differ in length");
  }
  if (ids.empty()) return 0.0;
  const std::size_t r = p.hidden_size();

  std::vector<StepCache> steps;
  HiddenState end = run_forward(p, ids, options, start, steps, nullptr);

  double total = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    check_token(p, targets[t]);
    const Vector logits = matvec(p.v_mat, steps[t].h);
    const Vector lp = log_softmax(logits);
    total -= lp[targets[t]];
    steps[t].probs.resize(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) steps[t].probs[k] = std::exp(lp[k]);
  }

  Vector dh_next(r, 0.0);  // ∂/∂h_t arriving from step t+1
  for (std::size_t t = ids.size(); t-- > 0;) {
    const StepCache& s = steps[t];

    Vector dy = s.probs;
    dy[targets[t]] -= 1.0;
    for (double& v : dy) v *= scale;
    for (std::size_t k = 0; k < dy.size(); ++k) {
      if (dy[k] == 0.0) continue;
      auto vrow = g.v_mat.row(k);
      for (std::size_t i = 0; i < r; ++i) vrow[i] += dy[k] * s.h[i];
    }
    Vector dh = matvec_transposed(p.v_mat, dy);
    for (std::size_t i = 0; i < r; ++i) dh[i] += dh_next[i];

    // Through h = raw / scale.
    Vector draw = dh;
    if (s.scale != 1.0) {
      const std::size_t j = argmax_abs(s.raw);
      const double proj = dot(dh, s.raw);
      for (double& v : draw) v /= s.scale;
      draw[j] -= std::copysign(1.0, s.raw[j]) * proj / (s.scale * s.scale);
    }

    Vector dpre(r), din(r);
    if (options.cell == CellKind::kMultiplicative) {
      for (std::size_t i = 0; i < r; ++i) {
        dpre[i] = draw[i] * s.in[i];
        din[i] = draw[i] * s.pre[i];
      }
    } else {
      for (std::size_t i = 0; i < r; ++i) {
        const double dz = draw[i] * (1.0 - s.raw[i] * s.raw[i]);
        dpre[i] = dz;
        din[i] = dz;
      }
    }

    const TokenId x = ids[t];
    const auto alpha = p.embed.row(x);
    for (std::size_t i = 0; i < r; ++i) {
      if (din[i] == 0.0) continue;
      auto urow = g.u_mat.row(i);
      for (std::size_t d = 0; d < alpha.size(); ++d) urow[d] += din[i] * alpha[d];
    }
    const Vector dalpha = matvec_transposed(p.u_mat, din);
    auto erow = g.embed.row(x);
    for (std::size_t d = 0; d < dalpha.size(); ++d) erow[d] += dalpha[d];

    std::span<const double> h_before;
    if (t > 0) {
      h_before = steps[t - 1].h;
    } else if (!start.fresh) {
      h_before = start.h;
    }
    if (h_before.empty()) {
      for (std::size_t i = 0; i < r; ++i) g.h0_pre[i] += dpre[i];
    } else {
      for (std::size_t i = 0; i < r; ++i) {
        if (dpre[i] == 0.0) continue;
        auto wrow = g.w_mat.row(i);
        for (std::size_t j = 0; j < r; ++j) wrow[j] += dpre[i] * h_before[j];
      }
    }
    if (t > 0) dh_next = matvec_transposed(p.w_mat, dpre);
  }

  if (end_state) *end_state = std::move(end);
  return total;
}

LossResult loss_and_gradients(const TslmParams& params, std::span<const TokenId> ids,
                              std::span<const TokenId> targets, const ModelOptions& options,
                              const HiddenState& start) {
  params.validate();
  if (ids.empty()) throw Error(ErrorCode::kInvalidArgument, "loss_and_gradients needs T >= 1");
  LossResult out;
  out.grads = Gradients::zeros(params.vocab_size(), params.embed_size(), params.hidden_size());
  const double inv = 1.0 / static_cast<double>(ids.size());
  const double total =
      accumulate_gradients(params, ids, targets, options, start, inv, out.grads, &out.end_state);
  out.loss = total * inv;
  return out;
}

}  // namespace tensorlm
