// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the library only through tensorlm.h.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tensorlm.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(tlm_status s, const char* what) {
  if (s == TLM_OK) return;
  std::string msg = std::string(what) + ": " + tlm_status_string(s);
  const std::string detail = tlm_last_error();
  if (!detail.empty()) msg += ": " + detail;
  if (s == TLM_ERR_INVALID_ARGUMENT) throw UsageError(msg);
  throw RuntimeFailure(msg);
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return buf;
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

using Corpus = Handle<tlm_corpus, tlm_corpus_free>;
using Model = Handle<tlm_model, tlm_model_free>;

struct DataFlags {
  std::string train, valid, test;
  std::size_t vocab_limit = 0;
};

struct TrainFlags {
  tlm_train_config cfg{};
  std::string cell = "tslm";
  std::string init;
  bool no_rescale = false;
  CLI::Option* init_scale = nullptr;
  CLI::Option* lr = nullptr;
  double init_scale_value = 0.0;
  double lr_value = 0.0;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--train", d.train, "training text")->required()->check(CLI::ExistingFile);
  cmd->add_option("--valid", d.valid, "validation text")->required()->check(CLI::ExistingFile);
  cmd->add_option("--test", d.test, "test text")->check(CLI::ExistingFile);
  cmd->add_option("--vocab-limit", d.vocab_limit,
                  "cap on vocabulary size including <unk> and <eos>; 0 = none");
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  tlm_train_config_init(&f.cfg, TLM_CELL_TSLM);
  cmd->add_option("--embed-size", f.cfg.embed_size, "embedding size m")->capture_default_str();
  cmd->add_option("--hidden-size", f.cfg.hidden_size, "hidden size r")->capture_default_str();
  cmd->add_option("--seq-len", f.cfg.seq_len, "BPTT length")->capture_default_str();
  cmd->add_option("--batch-size", f.cfg.batch_size, "parallel streams")->capture_default_str();
  cmd->add_option("--epochs", f.cfg.epochs, "training epochs")->capture_default_str();
  f.lr = cmd->add_option("--lr", f.lr_value, "initial learning rate (0.2 tslm, 1 rnn)");
  cmd->add_option("--clip", f.cfg.clip_norm, "global gradient-norm clip")->capture_default_str();
  cmd->add_option("--seed", f.cfg.seed, "random seed")->capture_default_str();
  cmd->add_option("--cell", f.cell, "recurrent cell")
      ->check(CLI::IsMember({"tslm", "rnn"}))
      ->capture_default_str();
  cmd->add_option("--init", f.init, "initialization (positive for tslm, uniform for rnn)")
      ->check(CLI::IsMember({"positive", "uniform"}));
  f.init_scale =
      cmd->add_option("--init-scale", f.init_scale_value, "init scale (0.3 tslm, 0.08 rnn)");
  cmd->add_flag("--no-rescale", f.no_rescale, "do not max-normalize tslm hidden states");
}

// Unset cell-dependent flags take the defaults of the chosen cell.
tlm_train_config resolve(const TrainFlags& f) {
  const tlm_cell cell = f.cell == "rnn" ? TLM_CELL_RNN : TLM_CELL_TSLM;
  tlm_train_config defaults;
  tlm_train_config_init(&defaults, cell);
  tlm_train_config c = f.cfg;
  c.cell = cell;
  c.learning_rate = f.lr->count() ? f.lr_value : defaults.learning_rate;
  c.init_scale = f.init_scale->count() ? f.init_scale_value : defaults.init_scale;
  c.init = f.init.empty() ? defaults.init
                          : (f.init == "uniform" ? TLM_INIT_UNIFORM : TLM_INIT_POSITIVE);
  c.rescale_hidden = f.no_rescale ? 0 : 1;
  return c;
}

void load_corpus(const DataFlags& d, Corpus& out) {
  check(tlm_corpus_load(d.train.c_str(), d.valid.c_str(), d.test.empty() ? nullptr : d.test.c_str(),
                        d.vocab_limit, &out.p),
        "loading corpus");
}

struct MetricsSink {
  std::ofstream* log = nullptr;
};

void on_epoch(const tlm_epoch_metrics* m, void* user) {
  auto* sink = static_cast<MetricsSink*>(user);
  const std::string line = std::to_string(m->epoch) + "\t" + num(m->train_ppl) + "\t" +
                           num(m->valid_ppl) + "\t" + num(m->seconds);
  std::cerr << "epoch " << m->epoch << "  train " << num(m->train_ppl) << "  valid "
            << num(m->valid_ppl) << "  lr " << num(m->learning_rate) << "  " << num(m->seconds)
            << "s\n";
  if (sink->log) *sink->log << line << '\n' << std::flush;
}

int run_train(const DataFlags& d, const TrainFlags& f, const std::string& checkpoint,
              const std::string& metrics_path) {
  const tlm_train_config cfg = resolve(f);
  if (!checkpoint.empty() && cfg.cell == TLM_CELL_RNN) {
    throw UsageError("--checkpoint stores the tslm cell only; drop it or use --cell tslm");
  }
  Corpus corpus;
  load_corpus(d, corpus);
  tlm_corpus_info info{};
  check(tlm_corpus_get_info(corpus.p, &info), "corpus info");
  std::cerr << "vocab " << info.vocab_size << ", train " << info.train_tokens << " tokens, valid "
            << info.valid_tokens << ", test " << info.test_tokens << "\n";

  std::ofstream log;
  MetricsSink sink;
  if (!metrics_path.empty()) {
    log.open(metrics_path);
    if (!log) throw RuntimeFailure("cannot write " + metrics_path);
    log << "epoch\ttrain_ppl\tvalid_ppl\tseconds\n";
    sink.log = &log;
  }
  Model model;
  check(tlm_train(corpus.p, &cfg, on_epoch, &sink, &model.p), "training");

  tlm_model_info mi{};
  check(tlm_model_get_info(model.p, &mi), "model info");
  std::cout << "parameters\t" << mi.parameter_count << "\n";
  tlm_eval_report valid{}, test{};
  check(tlm_model_eval_file(model.p, d.valid.c_str(), &valid), "validation");
  std::cout << "valid_ppl\t" << num(valid.perplexity) << "\n";
  if (!d.test.empty()) {
    check(tlm_model_eval_file(model.p, d.test.c_str(), &test), "test");
    std::cout << "test_ppl\t" << num(test.perplexity) << "\n";
  }
  if (!checkpoint.empty()) {
    check(tlm_model_save(model.p, checkpoint.c_str()), "saving checkpoint");
    std::cerr << "wrote " << checkpoint << "\n";
  }
  return kExitOk;
}

int run_eval(const std::string& checkpoint, const std::string& data, bool no_rescale) {
  Model model;
  check(tlm_model_load(checkpoint.c_str(), &model.p), "loading checkpoint");
  if (no_rescale) check(tlm_model_set_rescale(model.p, 0), "setting rescale");
  tlm_eval_report r{};
  check(tlm_model_eval_file(model.p, data.c_str(), &r), "evaluating");
  std::cout << "tokens\t" << r.tokens << "\n"
            << "mean_nll\t" << num(r.mean_nll) << "\n"
            << "perplexity\t" << num(r.perplexity) << "\n"
            << "oov_rate\t" << num(r.oov_rate) << "\n";
  return kExitOk;
}

int run_oracle(const std::string& data, std::size_t n, std::size_t vocab_limit, double tol) {
  tlm_oracle_report r{};
  check(tlm_oracle_check(data.c_str(), n, vocab_limit, &r), "oracle check");
  std::cout << "vocab_size\t" << r.vocab_size << "\n"
            << "windows\t" << r.windows << "\n"
            << "distinct_windows\t" << r.distinct_windows << "\n"
            << "sentence_dev\t" << sci(r.sentence_dev) << "\n"
            << "prefix_dev\t" << sci(r.prefix_dev) << "\n"
            << "conditional_dev\t" << sci(r.conditional_dev) << "\n"
            << "chain_rule_dev\t" << sci(r.chain_rule_dev) << "\n"
            << "orthogonality_dev\t" << sci(r.orthogonality_dev) << "\n"
            << "max_deviation\t" << sci(r.max_dev) << "\n";
  if (!(r.max_dev <= tol)) {
    std::cerr << "max deviation " << sci(r.max_dev) << " exceeds " << sci(tol) << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int run_equivalence(std::size_t m, std::size_t r, std::size_t vocab, std::size_t t,
                    std::size_t trials, std::uint64_t seed, double tol) {
  double dev = 0.0;
  check(tlm_equivalence_check(m, r, vocab, t, trials, seed, &dev), "equivalence check");
  std::cout << "trials\t" << trials << "\n"
            << "max_deviation\t" << sci(dev) << "\n";
  if (!(dev <= tol)) {
    std::cerr << "max deviation " << sci(dev) << " exceeds " << sci(tol) << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int run_decompose(std::size_t order, std::size_t dim, std::size_t rank, std::uint64_t seed) {
  std::vector<tlm_decompose_row> rows(rank);
  check(tlm_decompose_demo(order, dim, rank, seed, rows.data(), rows.size()), "decomposition");
  std::cout << "rank\tabs_error\trel_error\tdiscarded_energy\n";
  for (const auto& row : rows) {
    std::cout << row.rank << "\t" << sci(row.abs_error) << "\t" << sci(row.rel_error) << "\t"
              << sci(row.discarded_energy) << "\n";
  }
  return kExitOk;
}

int run_sweep(const DataFlags& d, const TrainFlags& f, const std::string& param,
              const std::vector<std::size_t>& values) {
  const tlm_train_config cfg = resolve(f);
  Corpus corpus;
  load_corpus(d, corpus);
  std::vector<tlm_sweep_row> rows(values.size());
  const tlm_sweep_param p = param == "seq-len" ? TLM_SWEEP_SEQ_LEN : TLM_SWEEP_HIDDEN_SIZE;
  check(tlm_sweep(corpus.p, &cfg, p, values.data(), values.size(), rows.data()), "sweep");
  std::cout << param << "\tvalid_ppl\ttest_ppl\n";
  for (const auto& row : rows) {
    std::cout << row.value << "\t" << num(row.valid_ppl) << "\t" << num(row.test_ppl) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-space language model toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tlm_version()));

  DataFlags train_data;
  TrainFlags train_flags;
  std::string checkpoint, metrics_log;
  auto* train = app.add_subcommand("train", "train a model and report perplexity");
  add_data_flags(train, train_data);
  add_train_flags(train, train_flags);
  train->add_option("--checkpoint", checkpoint, "write the trained model here");
  train->add_option("--metrics-log", metrics_log, "per-epoch tab-separated log");

  std::string eval_ckpt, eval_data;
  bool eval_no_rescale = false;
  auto* eval = app.add_subcommand("eval", "perplexity of a checkpoint on a text file");
  eval->add_option("--checkpoint", eval_ckpt, "model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "text file")->required()->check(CLI::ExistingFile);
  eval->add_flag("--no-rescale", eval_no_rescale, "evaluate the unnormalized recurrence");

  std::string oracle_data;
  std::size_t oracle_n = 0, oracle_vocab = 0;
  double oracle_tol = 1e-12;
  auto* oracle = app.add_subcommand("oracle-check", "n-gram tensor identities against counting");
  oracle->add_option("--data", oracle_data, "text file, one sentence per line")
      ->required()
      ->check(CLI::ExistingFile);
  oracle->add_option("--n", oracle_n, "window length")->required()->check(CLI::Range(1, 16));
  oracle->add_option("--vocab-limit", oracle_vocab,
                     "cap on vocabulary size including <unk> and <eos>; 0 = none");
  oracle->add_option("--tol", oracle_tol, "failure threshold")->capture_default_str();

  std::size_t eq_m = 0, eq_r = 0, eq_vocab = 0, eq_t = 0, eq_trials = 100;
  std::uint64_t eq_seed = 1;
  double eq_tol = 1e-10;
  auto* equiv = app.add_subcommand("equivalence-check",
                                   "recurrence vs full parameter-tensor contraction");
  equiv->add_option("--m", eq_m, "embedding size")->required()->check(CLI::PositiveNumber);
  equiv->add_option("--r", eq_r, "hidden size")->required()->check(CLI::PositiveNumber);
  equiv->add_option("--vocab", eq_vocab, "vocabulary size")->required()->check(CLI::PositiveNumber);
  equiv->add_option("--t", eq_t, "tensor order; prefixes have t-1 tokens")
      ->required()
      ->check(CLI::Range(2, 64));
  equiv->add_option("--trials", eq_trials, "random instances")->capture_default_str();
  equiv->add_option("--seed", eq_seed, "random seed")->capture_default_str();
  equiv->add_option("--tol", eq_tol, "failure threshold")->capture_default_str();

  std::size_t dc_order = 0, dc_dim = 0, dc_rank = 0;
  std::uint64_t dc_seed = 1;
  auto* decomp = app.add_subcommand("decompose-demo",
                                    "reconstruction error of a random tensor per rank");
  decomp->add_option("--order", dc_order, "tensor order")->required()->check(CLI::Range(2, 32));
  decomp->add_option("--dim", dc_dim, "mode size")->required()->check(CLI::PositiveNumber);
  decomp->add_option("--rank", dc_rank, "largest rank to try")
      ->required()
      ->check(CLI::PositiveNumber);
  decomp->add_option("--seed", dc_seed, "random seed")->capture_default_str();

  DataFlags sweep_data;
  TrainFlags sweep_flags;
  std::string sweep_param;
  std::vector<std::size_t> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "retrain over sequence lengths or hidden sizes");
  add_data_flags(sweep, sweep_data);
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--param", sweep_param, "swept quantity")
      ->required()
      ->check(CLI::IsMember({"seq-len", "hidden-size"}));
  sweep->add_option("--values", sweep_values, "values to try")
      ->required()
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    std::cout << tlm_version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*train) return run_train(train_data, train_flags, checkpoint, metrics_log);
    if (*eval) return run_eval(eval_ckpt, eval_data, eval_no_rescale);
    if (*oracle) return run_oracle(oracle_data, oracle_n, oracle_vocab, oracle_tol);
    if (*equiv) return run_equivalence(eq_m, eq_r, eq_vocab, eq_t, eq_trials, eq_seed, eq_tol);
    if (*decomp) return run_decompose(dc_order, dc_dim, dc_rank, dc_seed);
    if (*sweep) return run_sweep(sweep_data, sweep_flags, sweep_param, sweep_values);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
