// SPDX-License-Identifier: Apache-2.0
// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if any
// criterion fails. `--ptb DIR` adds a long, ungated Penn Treebank run.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "tensorlm/corpus.hpp"
#include "tensorlm/decomposition.hpp"
#include "tensorlm/ngram_bridge.hpp"
#include "tensorlm/training.hpp"

using namespace tensorlm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<TokenId> random_ids(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<TokenId> pick(0, static_cast<TokenId>(vocab - 1));
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = pick(rng);
  return ids;
}

struct RandomCorpus {
  std::size_t vocab = 0, n = 0;
  std::vector<Window> windows;
};

RandomCorpus random_corpus(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(1, 4), count(1, 60);
  RandomCorpus c;
  c.vocab = dim(rng);
  c.n = dim(rng);
  c.windows = oracle::random_windows(count(rng), c.vocab, c.n, rng);
  return c;
}

constexpr std::size_t kCorpora = 1000;
constexpr std::uint64_t kCorpusSeed = 20240601;

// ---- 1 ----------------------------------------------------------------------

Outcome sentence_joint_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(kCorpusSeed);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < kCorpora; ++k) {
    const RandomCorpus c = random_corpus(rng);
    const NgramTable table = build_joint(c.windows, c.vocab, c.n);
    for (const auto& idx : oracle::all_indices(Shape(c.n, c.vocab))) {
      const Window w(idx.begin(), idx.end());
      const double via_tensor = inner_product(sentence_tensor({w, c.vocab}), table.joint);
      worst = std::max(worst, std::abs(via_tensor - oracle::counted_window_prob(c.windows, w)));
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 30.0,
          fmt("%zu corpora, %zu windows, max dev %.3e (tol 1e-12), %.2fs (limit 30s)", kCorpora,
              checked, worst, secs)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome prefix_and_conditional_oracle() {
  std::mt19937_64 rng(kCorpusSeed);
  double marginal_dev = 0.0, conditional_dev = 0.0;
  std::size_t prefixes = 0, conditionals = 0;
  for (std::size_t k = 0; k < kCorpora; ++k) {
    const RandomCorpus c = random_corpus(rng);
    const NgramTable table = build_joint(c.windows, c.vocab, c.n);
    for (std::size_t len = 1; len <= c.n; ++len) {
      for (const auto& idx : oracle::all_indices(Shape(len, c.vocab))) {
        const std::vector<TokenId> prefix(idx.begin(), idx.end());
        const double via_tensor =
            inner_product(prefix_tensor(prefix, c.n, c.vocab), table.joint);
        const double via_table = prefix_probability(table, prefix);
        const double enumerated = oracle::enumerated_marginal(table.joint, prefix, c.vocab, c.n);
        const double counted = oracle::counted_prefix_prob(c.windows, prefix);
        for (double v : {via_tensor, via_table})
          marginal_dev = std::max({marginal_dev, std::abs(v - enumerated), std::abs(v - counted)});
        ++prefixes;

        if (len == c.n || counted == 0.0) continue;
        for (TokenId next = 0; next < c.vocab; ++next) {
          std::vector<TokenId> longer = prefix;
          longer.push_back(next);
          const double ratio = oracle::counted_prefix_prob(c.windows, longer) / counted;
          conditional_dev =
              std::max(conditional_dev, std::abs(conditional_prob(table, prefix, next) - ratio));
          ++conditionals;
        }
      }
    }
  }
  return {marginal_dev <= 1e-12 && conditional_dev <= 1e-12,
          fmt("%zu prefixes max dev %.3e, %zu conditionals max dev %.3e (tol 1e-12)", prefixes,
              marginal_dev, conditionals, conditional_dev)};
}

// ---- 3 ----------------------------------------------------------------------

TslmParams random_params(std::size_t v, std::size_t m, std::size_t r, std::uint64_t seed) {
  TslmParams p = TslmParams::random(v, m, r, 1.0, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  p.h0_pre = oracle::random_vector(r, rng, 0.5, 1.5);
  return p;
}

Outcome contraction_equivalence() {
  constexpr int kTrials = 200;
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> dim(1, 4), order(2, 5);
  double worst = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t m = dim(rng), r = dim(rng), v = dim(rng), t = order(rng);
    const TslmParams p = random_params(v, m, r, 5000 + trial);
    const auto prefix = random_ids(t - 1, v, rng);

    const DenseTensor param = build_param_tensor(p, t);
    Vector contracted(v, 0.0);
    for (const auto& idx : oracle::all_indices(param.shape())) {
      double a = param.at(idx);
      for (std::size_t j = 0; j + 1 < idx.size(); ++j) a *= p.embed(prefix[j], idx[j]);
      contracted[idx.back()] += a;
    }
    const Vector naive = oracle::naive_logits(p, oracle::naive_hiddens(p, prefix).back());
    const Vector recurrent = forward_sequence(p, prefix).logits.back();
    for (std::size_t k = 0; k < v; ++k)
      worst = std::max({worst, std::abs(contracted[k] - naive[k]),
                        std::abs(recurrent[k] - naive[k])});
  }
  return {worst <= 1e-10, fmt("%d trials, max elementwise dev %.3e (tol 1e-10)", kTrials, worst)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome gradient_check() {
  constexpr int kTrials = 60;
  constexpr std::size_t kM = 4, kR = 4, kV = 5, kT = 6;
  std::mt19937_64 rng(37);
  double worst = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const TslmParams p = random_params(kV, kM, kR, 7000 + trial);
    const auto ids = random_ids(kT, kV, rng), targets = random_ids(kT, kV, rng);
    const ModelOptions o{CellKind::kMultiplicative, trial % 2 == 1};
    const LossResult analytic = loss_and_gradients(p, ids, targets, o);
    const TslmParams numeric = oracle::central_differences(
        p, [&](const TslmParams& q) { return loss_and_gradients(q, ids, targets, o).loss; },
        1e-5);
    const auto an = analytic.grads.tensors();
    const auto num = numeric.tensors();
    for (std::size_t k = 0; k < an.size(); ++k)
      worst = std::max(worst, oracle::relative_error(an[k], num[k]));
  }
  return {worst <= 1e-5,
          fmt("%d trials (m=r=4, |V|=5, T=6, eps 1e-5), max relative error %.3e (tol 1e-5)",
              kTrials, worst)};
}

// ---- 5 ----------------------------------------------------------------------

double residual(const DenseTensor& t, std::size_t rank) {
  const DecompChain c = recursive_decompose(t, rank);
  return oracle::frobenius_distance(reconstruct(c, t.order()).data(), t.data());
}

Outcome decomposition() {
  std::mt19937_64 rng(41);
  double rank_one_err = 0.0, full_err = 0.0, worst_increase = 0.0;
  std::size_t tensors = 0;
  for (std::size_t order = 2; order <= 4; ++order)
    for (std::size_t m = 2; m <= 4; ++m)
      for (int k = 0; k < 5; ++k) {
        std::vector<Vector> vs;
        for (std::size_t j = 0; j < order; ++j) vs.push_back(oracle::random_vector(m, rng));
        DenseTensor t = DenseTensor::filled(Shape(order, m), 1.0);
        for (const auto& idx : oracle::all_indices(t.shape()))
          for (std::size_t j = 0; j < order; ++j) t.at(idx) *= vs[j][idx[j]];
        rank_one_err = std::max(rank_one_err, residual(t, 1));
        ++tensors;
      }
  for (std::size_t order : {3u, 4u})
    for (std::size_t m = 2; m <= 4; ++m)
      for (int k = 0; k < 10; ++k) {
        const DenseTensor t = oracle::random_tensor(Shape(order, m), rng);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t r = 1; r <= m; ++r) {
          const double e = residual(t, r);
          if (e > prev) worst_increase = std::max(worst_increase, e - prev);
          prev = e;
        }
        full_err = std::max(full_err, prev);
        ++tensors;
      }
  const bool pass = rank_one_err <= 1e-10 && full_err <= 1e-8 && worst_increase <= 1e-12;
  return {pass, fmt("%zu tensors: rank-one err %.3e (tol 1e-10), full-rank err %.3e (tol 1e-8), "
                    "largest increase with rank %.3e",
                    tensors, rank_one_err, full_err, worst_increase)};
}

// ---- 6 and 9 ----------------------------------------------------------------

struct ChainData {
  oracle::BigramChain chain;
  TokenSeq train, valid, test;
};

ChainData chain_data(std::size_t train_tokens) {
  ChainData d;
  d.chain = oracle::BigramChain::random(10, 0.3, 7);
  std::mt19937_64 rng(8);
  d.train.ids = d.chain.sample(train_tokens, rng);
  d.valid.ids = d.chain.sample(10000, rng);
  d.test.ids = d.chain.sample(10000, rng);
  return d;
}

TrainConfig synthetic_config() {
  TrainConfig c;
  c.hidden_size = 32;
  c.embed_size = 32;
  c.seq_len = 20;
  c.batch_size = 20;
  c.epochs = 15;
  c.seed = 1;
  return c;
}

Outcome synthetic_learning() {
  const auto t0 = Clock::now();
  const ChainData d = chain_data(100000);
  const TrainConfig c = synthetic_config();
  const TrainResult res = train(d.chain.transition.size(), d.train, d.valid, c);
  const double test = perplexity(res.params, d.test, c.model_options()).perplexity;
  const double target = std::exp(d.chain.entropy);
  const double ratio = test / target;
  const double secs = seconds_since(t0);
  return {ratio <= 1.05 && secs < 300.0,
          fmt("test PPL %.4f vs exp(H) %.4f, ratio %.4f (limit 1.05), %.1fs (limit 300s)", test,
              target, ratio, secs)};
}

Vocab synthetic_vocab(std::size_t size) {
  std::vector<std::string> tokens{"<unk>", "<eos>"};
  for (std::size_t k = 2; k < size; ++k) tokens.push_back("s" + std::to_string(k));
  return Vocab(tokens);
}

// Improvement then plateau: the curve never rises by more than `slack` above
// its running best, and the last point is within `slack` of the overall best.
bool improves_then_plateaus(const std::vector<double>& ppl, double slack, double* rise) {
  double best = ppl.front();
  *rise = 0.0;
  for (double v : ppl) {
    *rise = std::max(*rise, v / best - 1.0);
    best = std::min(best, v);
  }
  return *rise <= slack && ppl.back() / best - 1.0 <= slack;
}

std::string curve(const std::vector<std::size_t>& xs, const std::vector<SweepRow>& rows) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i)
    s += fmt("%s%zu:%.3f", i ? " " : "", xs[i], rows[i].test_ppl);
  return s;
}

Outcome sweep_shapes() {
  const ChainData d = chain_data(40000);
  Corpus corpus{synthetic_vocab(d.chain.transition.size()), d.train, d.valid, d.test};
  TrainConfig base = synthetic_config();
  base.epochs = 8;

  const std::vector<std::size_t> hidden{2, 4, 8, 16, 32, 64};
  const auto h_rows = sweep(corpus, base, SweepParam::kHiddenSize, hidden);
  const std::vector<std::size_t> lengths{2, 5, 10, 20, 40};
  const auto l_rows = sweep(corpus, base, SweepParam::kSeqLen, lengths);

  std::vector<double> h_ppl, l_ppl;
  for (const auto& r : h_rows) h_ppl.push_back(r.test_ppl);
  for (const auto& r : l_rows) l_ppl.push_back(r.test_ppl);
  const double h_best = *std::min_element(h_ppl.begin(), h_ppl.end());
  const double gain = h_ppl.front() / h_best - 1.0;
  double h_rise = 0.0, l_rise = 0.0;
  const bool h_ok = gain >= 0.05 && improves_then_plateaus(h_ppl, 0.02, &h_rise);
  const bool l_ok = improves_then_plateaus(l_ppl, 0.02, &l_rise);
  return {h_ok && l_ok,
          fmt("hidden [%s] gain %.1f%% rise %.2f%%; seq_len [%s] rise %.2f%%",
              curve(hidden, h_rows).c_str(), 100.0 * gain, 100.0 * h_rise,
              curve(lengths, l_rows).c_str(), 100.0 * l_rise)};
}

// ---- 7 ----------------------------------------------------------------------

constexpr const char* kMemorizationText =
    "the cat sat on the mat and the dog sat on the rug\n"
    "a bird sang in the tree while the sun rose over the hill\n"
    "we ate bread with jam and drank tea by the fire\n"
    "then we slept until the morning came at last\n";

Outcome memorization() {
  const Vocab vocab = build_vocab(kMemorizationText);
  const TokenSeq seq = encode(kMemorizationText, vocab);
  TrainConfig c;
  c.batch_size = 1;
  c.seq_len = 5;
  c.hidden_size = 32;
  c.embed_size = 32;
  c.learning_rate = 0.5;
  c.epochs = 200;
  c.seed = 1;
  const TrainResult res = train(vocab.size(), seq, TokenSeq{}, c);
  double best = std::numeric_limits<double>::infinity();
  std::size_t first = 0;
  for (const auto& m : res.epochs) {
    best = std::min(best, m.train_ppl);
    if (first == 0 && m.train_ppl < 1.1) first = m.epoch;
  }
  return {seq.size() == 50 && first != 0,
          fmt("%zu tokens, best training PPL %.4f, first epoch below 1.1: %zu (limit 200)",
              seq.size(), best, first)};
}

// ---- 8 ----------------------------------------------------------------------

Outcome metric_identities() {
  std::mt19937_64 rng(43);
  double uniform_dev = 0.0, row_dev = 0.0;
  bool exp_identity = true;
  for (std::size_t v : {2u, 3u, 5u, 7u, 10u, 64u, 1000u}) {
    TslmParams p = TslmParams::random(v, 4, 4, 0.5, v);
    p.v_mat = Matrix(v, 4);
    TokenSeq s;
    s.ids = random_ids(500, v, rng);
    const EvalReport r = perplexity(p, s, {CellKind::kMultiplicative, true});
    uniform_dev = std::max(uniform_dev, std::abs(r.perplexity - static_cast<double>(v)) / v);
    exp_identity = exp_identity && r.perplexity == std::exp(r.mean_nll);
  }
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> size(1, 500);
    std::uniform_real_distribution<double> spread(0.0, 60.0);
    const Vector logits = oracle::random_vector(size(rng), rng, -1.0, 1.0);
    Vector scaled = logits;
    const double s = spread(rng);
    for (double& x : scaled) x *= s;
    long double sum = 0.0L;
    for (double q : softmax(scaled)) sum += q;
    row_dev = std::max(row_dev, static_cast<double>(std::abs(sum - 1.0L)));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const TslmParams p = TslmParams::positive(30, 8, 8, 0.3, 900 + trial);
    TokenSeq s;
    s.ids = random_ids(300, 30, rng);
    const EvalReport r = perplexity(p, s, {CellKind::kMultiplicative, true});
    exp_identity = exp_identity && r.perplexity == std::exp(r.mean_nll);
    long double sum = 0.0L;
    for (double q : conditional_distribution(p, std::span(s.ids).first(20),
                                             {CellKind::kMultiplicative, true}))
      sum += q;
    row_dev = std::max(row_dev, static_cast<double>(std::abs(sum - 1.0L)));
  }
  return {uniform_dev <= 1e-15 && row_dev <= 1e-12 && exp_identity,
          fmt("uniform PPL rel dev %.3e, softmax row sum dev %.3e (tol 1e-12), exp(mean NLL) "
              "== PPL: %s",
              uniform_dev, row_dev, exp_identity ? "yes" : "no")};
}

// ---- optional ---------------------------------------------------------------

void ptb_run(const std::string& dir, std::size_t epochs) {
  const auto t0 = Clock::now();
  const Corpus corpus =
      load_corpus(dir + "/ptb.train.txt", dir + "/ptb.valid.txt", dir + "/ptb.test.txt");
  TrainConfig c;
  c.epochs = epochs;
  const TrainResult res = train(corpus.vocab.size(), corpus.train, corpus.valid, c,
                                [](const EpochMetrics& m) {
                                  std::fprintf(stderr, "ptb epoch %zu train %.2f valid %.2f\n",
                                               m.epoch, m.train_ppl, m.valid_ppl);
                                });
  const double test = perplexity(res.params, corpus.test, c.model_options()).perplexity;
  std::printf("optional ptb: test PPL %.2f (target <= 130, not gated), %.0fs\n", test,
              seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensorlm acceptance checks"};
  std::string ptb_dir;
  std::size_t ptb_epochs = 13;
  std::vector<int> only;
  app.add_option("--ptb", ptb_dir, "directory holding ptb.{train,valid,test}.txt")
      ->check(CLI::ExistingDirectory);
  app.add_option("--ptb-epochs", ptb_epochs, "epochs for the optional run");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria{
      sentence_joint_oracle, prefix_and_conditional_oracle, contraction_equivalence,
      gradient_check,        decomposition,                 synthetic_learning,
      memorization,          metric_identities,             sweep_shapes};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  if (!ptb_dir.empty()) {
    try {
      ptb_run(ptb_dir, ptb_epochs);
    } catch (const std::exception& e) {
      std::printf("optional ptb: error: %s\n", e.what());
    }
  }
  return failed == 0 ? 0 : 1;
}
