// Command-line front end: gradient checking, unbiasedness and variance
// experiments, training runs, equal-budget estimator comparisons, and the
// metric-vs-multiclass hardness demo. Data products (CSV) go to stdout or
// --out; progress and summaries go to stderr. Exit codes: 0 success,
// 1 experiment/assertion failure, 2 usage error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mb/gradcheck.hpp"
#include "mb/losses.hpp"
#include "mb/trainer.hpp"
#include "mb/variance.hpp"

namespace {

using namespace mb;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct SynthOpts {
  std::size_t classes = 4;
  std::size_t per_class = 10;
  std::size_t dim = 8;
  double center_scale = 3.0;
  double noise = 0.3;
  std::uint64_t data_seed = 1;
  std::string data_path;  // overrides the synthetic generator when set
};

void add_synth_opts(CLI::App* cmd, SynthOpts& o) {
  cmd->add_option("--classes", o.classes, "number of synthetic classes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--per-class", o.per_class, "samples per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--dim", o.dim, "feature dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--center-scale", o.center_scale,
                  "class centers drawn uniformly in [-s, s]^dim")
      ->capture_default_str();
  cmd->add_option("--noise", o.noise, "per-sample Gaussian noise sigma")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--data-seed", o.data_seed, "dataset generator seed")
      ->capture_default_str();
  cmd->add_option("--data", o.data_path,
                  "load dataset from CSV instead of generating");
}

Dataset make_dataset(const SynthOpts& o) {
  if (!o.data_path.empty()) {
    std::vector<long long> label_map;
    Dataset ds = load_dataset_csv(o.data_path, &label_map);
    std::cerr << "loaded " << ds.size() << " samples, " << ds.num_classes
              << " classes from " << o.data_path << "\n";
    return ds;
  }
  return gen_gaussian_clusters(static_cast<int>(o.classes), o.per_class,
                               o.dim, o.center_scale, o.noise, o.data_seed);
}

struct ModelOpts {
  std::string kind = "linear";
  std::size_t hidden = 8;
  std::size_t sig_dim = 8;
  std::uint64_t state_seed = 7;
  std::string init_checkpoint;
};

void add_model_opts(CLI::App* cmd, ModelOpts& o) {
  cmd->add_option("--model", o.kind, "embedding model")
      ->check(CLI::IsMember({"linear", "mlp"}))
      ->capture_default_str();
  cmd->add_option("--hidden", o.hidden, "hidden width (mlp only)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--sig-dim", o.sig_dim, "signature dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--state-seed", o.state_seed, "parameter init seed")
      ->capture_default_str();
  cmd->add_option("--init-checkpoint", o.init_checkpoint,
                  "start from a checkpoint instead of random init");
}

EmbeddingState make_state(const ModelOpts& o, std::size_t input_dim) {
  if (!o.init_checkpoint.empty()) {
    EmbeddingState state = load_checkpoint(o.init_checkpoint);
    if (state.spec.input_dim() != input_dim)
      throw std::runtime_error("checkpoint input dim does not match dataset");
    return state;
  }
  ModelSpec spec;
  if (o.kind == "linear") {
    spec = {ModelKind::linear, {input_dim, o.sig_dim}};
  } else {
    spec = {ModelKind::mlp, {input_dim, o.hidden, o.sig_dim}};
  }
  Rng rng(o.state_seed);
  return init_state(spec, rng);
}

// Writes `text` to the path from --out, or to stdout when none was given.
void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error(out_path + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(out_path + ": write failed");
}

std::vector<LrDrop> parse_lr_drops(const std::vector<std::string>& specs) {
  std::vector<LrDrop> drops;
  for (const std::string& s : specs) {
    const auto colon = s.find(':');
    std::size_t consumed = 0;
    LrDrop drop{};
    bool ok = colon != std::string::npos;
    if (ok) {
      try {
        drop.step = std::stoull(s.substr(0, colon), &consumed);
        ok = consumed == colon;
        std::size_t tail = 0;
        drop.lr = std::stod(s.substr(colon + 1), &tail);
        ok = ok && tail == s.size() - colon - 1 && drop.lr > 0;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok)
      throw CLI::ValidationError("--lr-drop",
                                 "expected STEP:LR, got '" + s + "'");
    drops.push_back(drop);
  }
  return drops;
}

// ---------------------------------------------------------------- grad-check

int cmd_grad_check(std::uint64_t seed, std::size_t states, std::size_t dim,
                   std::size_t hidden, std::size_t sig_dim) {
  const double tolerance = 1e-4;
  const double theta = 2.0;
  Rng rng(seed);
  double worst = 0.0;

  const auto run_probe_checks = [&](const ModelSpec& spec, const char* name) {
    double local = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      const CheckableConfig cfg =
          draw_checkable_config(spec, 6, theta, 1e-3, rng);
      local = std::max(local, finite_diff_check(cfg.state, cfg.inputs,
                                                pair_hinge_probe(theta)));
    }
    std::printf("probe gradients  %-6s max rel err %.3g\n", name, local);
    worst = std::max(worst, local);
  };
  run_probe_checks({ModelKind::linear, {dim, sig_dim}}, "linear");
  run_probe_checks({ModelKind::mlp, {dim, hidden, sig_dim}}, "mlp");

  const Dataset ds = gen_gaussian_clusters(3, 3, 2, 2.0, 0.6, seed ^ 0x11);
  Rng state_rng(seed ^ 0x22);
  const EmbeddingState state =
      init_state({ModelKind::linear, {ds.feature_dim, 2}}, state_rng);
  PairWeighting w = PairWeighting::balanced_for(ds.labels);
  // Keep the objective near 0.01 so bias coordinates (whose true gradient is
  // exactly zero) are not swamped by finite-difference rounding noise.
  w.same *= 0.02;
  w.not_same *= 0.02;
  const double full_err = full_gradient_fd_error(state, ds, w);
  std::printf("full gradient    linear max rel err %.3g\n", full_err);
  worst = std::max(worst, full_err);

  std::printf("max relative error %.3g (tolerance %g)\n", worst, tolerance);
  return worst < tolerance ? kExitOk : kExitFailure;
}

// -------------------------------------------------------------- unbiasedness

int cmd_unbiasedness(std::size_t m, std::size_t k, std::size_t classes,
                     std::size_t dim, std::size_t sig_dim, bool exhaustive,
                     std::size_t trials, std::uint64_t seed) {
  if (classes == 0 || m % classes != 0)
    throw CLI::ValidationError("--m", "m must be divisible by --classes");
  const Dataset ds = gen_gaussian_clusters(
      static_cast<int>(classes), m / classes, dim, 2.0, 0.6, seed ^ 0x101);
  Rng init(seed ^ 0x202);
  const EmbeddingState state =
      init_state({ModelKind::linear, {dim, sig_dim}}, init);
  const PairWeighting w = PairWeighting::unit();
  const GradientEstimate full = full_gradient(state, ds, w);

  if (exhaustive) {
    const std::uint64_t count = ordered_subsequence_count(m, k);
    if (count > 1000000ULL)
      throw CLI::ValidationError(
          "--exhaustive", "too many ordered batches; use sampled mode");
    const Vec mean = exhaustive_multibatch_mean(state, ds, k, w);
    double dev = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i)
      dev = std::max(dev, std::abs(mean[i] - full.grad[i]));
    std::printf("exhaustive mean over %llu batches: max deviation %.3g\n",
                static_cast<unsigned long long>(count), dev);
    return dev < 1e-10 ? kExitOk : kExitFailure;
  }

  Vec sum(full.grad.size(), 0.0), sumsq(full.grad.size(), 0.0);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(seed ^ static_cast<std::uint64_t>(t));
    const GradientEstimate est = multibatch_estimate(state, ds, k, w, rng);
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += est.grad[i];
      sumsq[i] += est.grad[i] * est.grad[i];
    }
  }
  double worst_sigmas = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double mean = sum[i] / static_cast<double>(trials);
    const double var =
        std::max(0.0, sumsq[i] / static_cast<double>(trials) - mean * mean);
    const double se = std::sqrt(var / static_cast<double>(trials)) + 1e-15;
    worst_sigmas = std::max(worst_sigmas, std::abs(mean - full.grad[i]) / se);
  }
  std::printf(
      "sampled mean over %zu trials: worst deviation %.2f standard errors\n",
      trials, worst_sigmas);
  return worst_sigmas <= 4.0 ? kExitOk : kExitFailure;
}

// ------------------------------------------------------------- variance-scan

int cmd_variance_scan(const SynthOpts& synth, const ModelOpts& model,
                      const std::vector<std::size_t>& ks, std::size_t trials,
                      std::size_t pretrain_steps, double c3,
                      std::uint64_t seed, unsigned threads,
                      const std::string& out_path) {
  const Dataset ds = make_dataset(synth);
  EmbeddingState state = make_state(model, ds.feature_dim);
  if (pretrain_steps > 0) {
    TrainConfig cfg;
    cfg.estimator = EstimatorKind::multibatch;
    cfg.classes_per_batch =
        std::min<std::size_t>(4, static_cast<std::size_t>(ds.num_classes));
    cfg.samples_per_class = 4;
    cfg.lr = 0.02;
    cfg.steps = pretrain_steps;
    cfg.eval_every = pretrain_steps;
    cfg.seed = seed ^ 0x505;
    state = train(state, ds, cfg).first;
    std::cerr << "pretrained " << pretrain_steps << " steps\n";
  }

  const PairWeighting w = PairWeighting::unit();
  const PairGradTable table = build_pair_grad_table(state, ds, w);

  std::vector<VarianceReport> reports;
  std::vector<std::pair<double, double>> mb_points, pw_points;
  for (std::size_t k : ks) {
    VarianceReport mb = empirical_variance(EstimatorKind::multibatch, state,
                                           ds, k, trials, seed, w, &table,
                                           threads);
    mb.bound_value = variance_bound(table, k, c3);
    reports.push_back(mb);
    mb_points.emplace_back(static_cast<double>(k), mb.empirical_variance);
    VarianceReport pw =
        empirical_variance(EstimatorKind::pairwise_minibatch, state, ds, k,
                           trials, seed + 1, w, &table, threads);
    pw.bound_value = variance_bound(table, k, c3);
    reports.push_back(pw);
    pw_points.emplace_back(static_cast<double>(k), pw.empirical_variance);
    std::cerr << "k=" << k << " multibatch=" << mb.empirical_variance
              << " pairwise=" << pw.empirical_variance << "\n";
  }

  std::ostringstream csv;
  write_variance_csv(csv, reports);
  emit(out_path, csv.str());

  if (ks.size() >= 2) {
    std::cerr << "multibatch log-log slope: " << variance_slope(mb_points)
              << "\npairwise   log-log slope: " << variance_slope(pw_points)
              << "\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------ train/compare

TrainConfig make_train_config(const std::string& estimator, std::size_t cpb,
                              std::size_t spc, std::optional<std::size_t> k,
                              double lr,
                              const std::vector<std::string>& drop_specs,
                              bool default_drop, std::size_t steps,
                              std::size_t eval_every, std::uint64_t seed,
                              const std::string& weighting) {
  TrainConfig cfg;
  if (estimator == "multibatch")
    cfg.estimator = EstimatorKind::multibatch;
  else if (estimator == "pairwise")
    cfg.estimator = EstimatorKind::pairwise_minibatch;
  else
    cfg.estimator = EstimatorKind::full;
  cfg.classes_per_batch = cpb;
  cfg.samples_per_class = spc;
  if (k && *k != cfg.batch_size())
    throw CLI::ValidationError(
        "--k", "k must equal classes-per-batch * samples-per-class");
  cfg.lr = lr;
  cfg.steps = steps;
  cfg.eval_every = eval_every;
  cfg.seed = seed;
  cfg.weighting =
      weighting == "unit" ? BatchWeighting::unit : BatchWeighting::balanced;
  if (!drop_specs.empty()) {
    cfg.lr_drops = parse_lr_drops(drop_specs);
  } else if (default_drop && steps >= 10) {
    cfg.lr_drops = {{steps * 9 / 10, lr / 10.0}};
  }
  return cfg;
}

int cmd_train(const SynthOpts& synth, const ModelOpts& model,
              const TrainConfig& cfg, const std::string& out_path,
              const std::string& save_checkpoint_path) {
  const Dataset ds = make_dataset(synth);
  const EmbeddingState state0 = make_state(model, ds.feature_dim);
  const auto [state, history] = train(state0, ds, cfg);

  std::ostringstream csv;
  write_history_csv(csv, history);
  emit(out_path, csv.str());
  if (!history.rows.empty())
    std::cerr << "final objective " << history.rows.back().objective
              << ", accuracy " << history.rows.back().accuracy << "\n";
  if (!save_checkpoint_path.empty()) {
    save_checkpoint(state, save_checkpoint_path);
    std::cerr << "checkpoint written to " << save_checkpoint_path << "\n";
  }
  return kExitOk;
}

int cmd_compare(const SynthOpts& synth, const ModelOpts& model,
                TrainConfig cfg, double target, const std::string& out_stem) {
  const Dataset ds = make_dataset(synth);
  const EmbeddingState state0 = make_state(model, ds.feature_dim);

  std::string inline_out;
  const auto run = [&](EstimatorKind kind) {
    cfg.estimator = kind;
    const auto [state, history] = train(state0, ds, cfg);
    std::ostringstream csv;
    write_history_csv(csv, history);
    if (out_stem.empty()) {
      inline_out += "# estimator ";
      inline_out += estimator_name(kind);
      inline_out += "\n";
      inline_out += csv.str();
    } else {
      const std::string path =
          out_stem + "_" + std::string(estimator_name(kind)) + ".csv";
      emit(path, csv.str());
      std::cerr << "history written to " << path << "\n";
    }
    const auto first = history.first_below(target);
    if (first) {
      std::cerr << estimator_name(kind) << " first reached objective <= "
                << target << " at " << first->forward_passes
                << " forward passes\n";
    } else {
      std::cerr << estimator_name(kind) << " did not reach objective <= "
                << target << " within "
                << (history.rows.empty() ? 0
                                         : history.rows.back().forward_passes)
                << " forward passes\n";
    }
    return first;
  };

  const auto mb_first = run(EstimatorKind::multibatch);
  const auto pw_first = run(EstimatorKind::pairwise_minibatch);
  if (out_stem.empty()) std::cout << inline_out;

  if (mb_first &&
      (!pw_first || mb_first->forward_passes <= pw_first->forward_passes))
    std::cerr << "multibatch reached the target first\n";
  else if (pw_first)
    std::cerr << "pairwise reached the target first\n";
  return kExitOk;
}

// ------------------------------------------------------------ hardness-demo

int cmd_hardness_demo(std::uint64_t seed) {
  bool ok = true;

  // Part 1: drive the all-pairs objective to zero on a separable problem,
  // then build the mean-signature multiclass head and score it.
  const Dataset ds = gen_gaussian_clusters(4, 10, 2, 5.0, 0.08, 616);
  Rng init(71);
  const EmbeddingState state0 =
      init_state({ModelKind::linear, {ds.feature_dim, 2}}, init);
  TrainConfig cfg;
  cfg.estimator = EstimatorKind::multibatch;
  cfg.classes_per_batch = 4;
  cfg.samples_per_class = 4;
  cfg.lr = 0.05;
  cfg.lr_drops = {{2000, 0.01}, {3500, 0.001}};
  cfg.steps = 4000;
  cfg.eval_every = 1000;
  cfg.seed = seed;
  const auto [state, history] = train(state0, ds, cfg);
  const double objective = full_objective(state, ds, PairWeighting::unit());
  std::printf("trained metric objective: %.3g\n", objective);
  if (objective >= 1e-6) {
    std::printf("FAIL: training did not reach zero metric loss\n");
    ok = false;
  } else {
    Mat inputs(ds.size(), ds.feature_dim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto row = ds.sample(i);
      std::copy(row.begin(), row.end(), inputs.row(i));
    }
    const Mat sigs = forward_batch(state, inputs).signatures();
    const MulticlassHead head =
        construct_multiclass_head(sigs, ds.labels, ds.num_classes);
    const double hinge = multiclass_hinge(head, sigs, ds.labels);
    std::printf("constructed multiclass hinge: %.3g\n", hinge);
    ok = ok && hinge <= 1e-9;
  }

  // Part 2: the equidistant trio separates linearly but admits no threshold.
  const Dataset trio = equidistant_trio();
  MulticlassHead trio_head;
  trio_head.weights = Mat(2, 3);
  trio_head.weights.at(0, 0) = 1.0;
  trio_head.weights.at(0, 2) = 1.0;
  trio_head.weights.at(1, 1) = 1.0;
  trio_head.bias.assign(2, 0.0);
  const double trio_hinge =
      multiclass_hinge(trio_head, trio.features, trio.labels);
  double min_objective = std::numeric_limits<double>::infinity();
  for (double theta = 0.1; theta <= 10.0 + 1e-9; theta += 0.01) {
    const EmbeddingState ident = make_identity_linear(3, theta);
    min_objective = std::min(
        min_objective, full_objective(ident, trio, PairWeighting::unit()));
  }
  std::printf(
      "trio multiclass hinge: %g, min metric objective over thresholds: %.4f\n",
      trio_hinge, min_objective);
  ok = ok && trio_hinge == 0.0 && min_objective > 0.5;

  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "metric embedding training with all-pairs minibatch gradient estimation"};
  app.require_subcommand(1);
  unsigned threads = 1;  // accepted everywhere; drives the trial loops

  // grad-check
  auto* gc = app.add_subcommand(
      "grad-check", "verify analytic gradients against finite differences");
  std::uint64_t gc_seed = 42;
  std::size_t gc_states = 10, gc_dim = 4, gc_hidden = 8, gc_sig = 3;
  gc->add_option("--seed", gc_seed)->capture_default_str();
  gc->add_option("--states", gc_states, "random states per model")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--dim", gc_dim, "input dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--hidden", gc_hidden)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--sig-dim", gc_sig)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--threads", threads)->capture_default_str();

  // unbiasedness
  auto* ub = app.add_subcommand(
      "unbiasedness",
      "compare the multibatch estimator mean to the full gradient");
  std::size_t ub_m = 6, ub_k = 3, ub_classes = 3, ub_dim = 2, ub_sig = 2,
              ub_trials = 100000;
  std::uint64_t ub_seed = 42;
  bool ub_exhaustive = false;
  ub->add_option("--m", ub_m, "dataset size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ub->add_option("--k", ub_k, "batch size")
      ->check(CLI::Range(std::size_t{2}, std::size_t{4096}))
      ->capture_default_str();
  ub->add_option("--classes", ub_classes)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ub->add_option("--dim", ub_dim)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ub->add_option("--sig-dim", ub_sig)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ub->add_flag("--exhaustive", ub_exhaustive,
               "average over every ordered batch instead of sampling");
  ub->add_option("--trials", ub_trials, "sampled-mode trial count")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000000}))
      ->capture_default_str();
  ub->add_option("--seed", ub_seed)->capture_default_str();
  ub->add_option("--threads", threads)->capture_default_str();

  // variance-scan
  auto* vs = app.add_subcommand(
      "variance-scan", "empirical estimator variance over a batch-size grid");
  SynthOpts vs_synth;
  vs_synth.classes = 6;
  vs_synth.per_class = 10;
  vs_synth.dim = 4;
  vs_synth.noise = 0.6;
  vs_synth.data_seed = 303;
  ModelOpts vs_model;
  vs_model.kind = "mlp";
  vs_model.hidden = 8;
  vs_model.sig_dim = 4;
  vs_model.state_seed = 404;
  add_synth_opts(vs, vs_synth);
  add_model_opts(vs, vs_model);
  std::vector<std::size_t> vs_ks = {4, 8, 16, 32};
  std::size_t vs_trials = 2000, vs_pretrain = 0;
  double vs_c3 = 4.0;
  std::uint64_t vs_seed = 777;
  std::string vs_out;
  vs->add_option("--k", vs_ks, "batch sizes to scan")
      ->check(CLI::Range(std::size_t{2}, std::size_t{4096}))
      ->capture_default_str();
  vs->add_option("--trials", vs_trials)
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000000}))
      ->capture_default_str();
  vs->add_option("--pretrain-steps", vs_pretrain,
                 "multibatch steps before measuring")
      ->capture_default_str();
  vs->add_option("--c3", vs_c3, "coefficient of the O(1/k) bound term")
      ->capture_default_str();
  vs->add_option("--seed", vs_seed)->capture_default_str();
  vs->add_option("--threads", threads)->capture_default_str();
  vs->add_option("--out", vs_out, "write CSV here instead of stdout");

  // train
  auto* tr = app.add_subcommand("train", "run one training configuration");
  SynthOpts tr_synth;
  ModelOpts tr_model;
  add_synth_opts(tr, tr_synth);
  add_model_opts(tr, tr_model);
  std::string tr_estimator = "multibatch", tr_weighting = "balanced";
  std::size_t tr_cpb = 4, tr_spc = 4, tr_steps = 2000, tr_eval = 100;
  std::optional<std::size_t> tr_k;
  double tr_lr = 0.01;
  std::vector<std::string> tr_drops;
  std::uint64_t tr_seed = 42;
  std::string tr_out, tr_save;
  tr->add_option("--estimator", tr_estimator)
      ->check(CLI::IsMember({"multibatch", "pairwise", "full"}))
      ->capture_default_str();
  tr->add_option("--classes-per-batch", tr_cpb)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--samples-per-class", tr_spc)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--k", tr_k, "batch size (must equal the product above)");
  tr->add_option("--lr", tr_lr)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option(
      "--lr-drop", tr_drops,
      "STEP:LR, new learning rate once STEP steps complete (repeatable; "
      "default drops to lr/10 at 90% of steps)");
  tr->add_option("--steps", tr_steps, "training steps")->capture_default_str();
  tr->add_option("--eval-every", tr_eval)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--seed", tr_seed)->capture_default_str();
  tr->add_option("--weighting", tr_weighting)
      ->check(CLI::IsMember({"balanced", "unit"}))
      ->capture_default_str();
  tr->add_option("--out", tr_out, "write history CSV here instead of stdout");
  tr->add_option("--save-checkpoint", tr_save,
                 "write the final state as JSON");
  tr->add_option("--threads", threads)->capture_default_str();

  // compare
  auto* cp = app.add_subcommand(
      "compare", "multibatch vs pairwise at an equal forward-pass budget");
  SynthOpts cp_synth;
  cp_synth.classes = 20;
  cp_synth.per_class = 10;
  cp_synth.dim = 8;
  cp_synth.noise = 0.6;
  cp_synth.data_seed = 801;
  ModelOpts cp_model;
  cp_model.sig_dim = 8;
  cp_model.state_seed = 81;
  add_synth_opts(cp, cp_synth);
  add_model_opts(cp, cp_model);
  std::size_t cp_cpb = 4, cp_spc = 4, cp_steps = 2500, cp_eval = 10;
  std::optional<std::size_t> cp_k;
  double cp_lr = 0.35, cp_target = 0.05;
  std::vector<std::string> cp_drops;
  std::uint64_t cp_seed = 90;
  std::string cp_weighting = "balanced", cp_out;
  cp->add_option("--classes-per-batch", cp_cpb)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cp->add_option("--samples-per-class", cp_spc)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cp->add_option("--k", cp_k, "batch size (must equal the product above)");
  cp->add_option("--lr", cp_lr)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cp->add_option("--lr-drop", cp_drops, "STEP:LR (repeatable)");
  cp->add_option("--steps", cp_steps)->capture_default_str();
  cp->add_option("--eval-every", cp_eval)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cp->add_option("--seed", cp_seed)->capture_default_str();
  cp->add_option("--weighting", cp_weighting)
      ->check(CLI::IsMember({"balanced", "unit"}))
      ->capture_default_str();
  cp->add_option("--target", cp_target, "objective level to reach")
      ->capture_default_str();
  cp->add_option("--out", cp_out,
                 "stem for <stem>_multibatch.csv and <stem>_pairwise.csv");
  cp->add_option("--threads", threads)->capture_default_str();

  // hardness-demo
  auto* hd = app.add_subcommand(
      "hardness-demo",
      "zero metric loss yields a zero-loss multiclass head, but not conversely");
  std::uint64_t hd_seed = 72;
  hd->add_option("--seed", hd_seed)->capture_default_str();
  hd->add_option("--threads", threads)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gc->parsed())
      return cmd_grad_check(gc_seed, gc_states, gc_dim, gc_hidden, gc_sig);
    if (ub->parsed())
      return cmd_unbiasedness(ub_m, ub_k, ub_classes, ub_dim, ub_sig,
                              ub_exhaustive, ub_trials, ub_seed);
    if (vs->parsed())
      return cmd_variance_scan(vs_synth, vs_model, vs_ks, vs_trials,
                               vs_pretrain, vs_c3, vs_seed, threads, vs_out);
    if (tr->parsed())
      return cmd_train(tr_synth, tr_model,
                       make_train_config(tr_estimator, tr_cpb, tr_spc, tr_k,
                                         tr_lr, tr_drops, true, tr_steps,
                                         tr_eval, tr_seed, tr_weighting),
                       tr_out, tr_save);
    if (cp->parsed())
      return cmd_compare(cp_synth, cp_model,
                         make_train_config("multibatch", cp_cpb, cp_spc, cp_k,
                                           cp_lr, cp_drops, false, cp_steps,
                                           cp_eval, cp_seed, cp_weighting),
                         cp_target, cp_out);
    if (hd->parsed()) return cmd_hardness_demo(hd_seed);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
