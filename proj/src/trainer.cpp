#include "mb/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mb/kernels.hpp"
#include "mb/losses.hpp"

namespace mb {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate(const Dataset& ds) const {
  if (classes_per_batch == 0 || samples_per_class == 0)
    throw std::invalid_argument("train: batch composition must be positive");
  if (lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
  if (eval_every == 0)
    throw std::invalid_argument("train: eval_every must be positive");
  if (estimator == EstimatorKind::pairwise_minibatch && batch_size() % 2 != 0)
    throw std::invalid_argument("train: pairwise estimator needs an even batch size");
  if (static_cast<std::size_t>(ds.num_classes) < classes_per_batch)
    throw std::invalid_argument("train: dataset has fewer classes than classes_per_batch");
}

std::optional<HistoryRow> TrainHistory::first_below(double target) const {
  for (const HistoryRow& row : rows)
    if (row.objective <= target) return row;
  return std::nullopt;
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "step,forward_passes,objective,accuracy\n";
  for (const HistoryRow& r : history.rows)
    out << r.step << "," << r.forward_passes << "," << fmt_double(r.objective)
        << "," << fmt_double(r.accuracy) << "\n";
}

std::vector<std::size_t> compose_batch(const Dataset& ds, std::size_t c,
                                       std::size_t p, Rng& rng) {
  std::vector<std::size_t> eligible;
  for (int cls = 0; cls < ds.num_classes; ++cls)
    if (ds.by_class[cls].size() >= p) eligible.push_back(cls);
  if (eligible.empty())
    throw std::invalid_argument("compose_batch: no class has " +
                                std::to_string(p) + " samples");
  if (eligible.size() < c)
    throw std::invalid_argument("compose_batch: only " +
                                std::to_string(eligible.size()) +
                                " classes have >= " + std::to_string(p) +
                                " samples, need " + std::to_string(c));

  std::vector<std::size_t> batch;
  batch.reserve(c * p);
  for (std::size_t slot : rng.shuffle_k(eligible.size(), c)) {
    const auto& members = ds.by_class[eligible[slot]];
    for (std::size_t pick : rng.shuffle_k(members.size(), p))
      batch.push_back(members[pick]);
  }
  return batch;
}

void sgd_step(EmbeddingState& state, const GradientEstimate& grad, double lr) {
  if (grad.grad.size() != state.param_len())
    throw std::invalid_argument("sgd_step: gradient length " +
                                std::to_string(grad.grad.size()) +
                                " does not match parameter count " +
                                std::to_string(state.param_len()));
  kernels::axpy(-lr, grad.grad.data(), state.weights.data(),
                state.weights.size());
  state.theta -= lr * grad.grad.back();
}

std::pair<EmbeddingState, TrainHistory> train(const EmbeddingState& initial,
                                              const Dataset& ds,
                                              const TrainConfig& config) {
  config.validate(ds);
  EmbeddingState state = initial;
  TrainHistory history;

  // Separate streams: batch composition stays identical across estimators
  // even though they consume different amounts of randomness.
  Rng batch_rng(config.seed);
  Rng pair_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<LrDrop> drops = config.lr_drops;
  std::sort(drops.begin(), drops.end(),
            [](const LrDrop& a, const LrDrop& b) { return a.step < b.step; });

  const PairWeighting eval_weighting = PairWeighting::unit();
  std::size_t forward_passes = 0;
  double lr = config.lr;
  std::size_t next_drop = 0;

  const auto record = [&](std::size_t step) {
    history.rows.push_back({step, forward_passes,
                            full_objective(state, ds, eval_weighting),
                            eval_pair_accuracy(state, ds)});
  };

  for (std::size_t step = 1; step <= config.steps; ++step) {
    while (next_drop < drops.size() && drops[next_drop].step < step)
      lr = drops[next_drop++].lr;

    const std::vector<std::size_t> batch = compose_batch(
        ds, config.classes_per_batch, config.samples_per_class, batch_rng);

    GradientEstimate grad;
    if (config.estimator == EstimatorKind::full) {
      grad = full_gradient(state, ds,
                           config.weighting == BatchWeighting::balanced
                               ? PairWeighting::balanced_for(ds.labels)
                               : PairWeighting::unit());
    } else {
      PairWeighting weighting = PairWeighting::unit();
      if (config.weighting == BatchWeighting::balanced) {
        std::vector<int> batch_labels(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
          batch_labels[i] = ds.labels[batch[i]];
        weighting = PairWeighting::balanced_for(batch_labels);
      }
      grad = config.estimator == EstimatorKind::multibatch
                 ? multibatch_on_indices(state, ds, batch, weighting)
                 : pairwise_on_indices(state, ds, batch, batch.size(),
                                       weighting, pair_rng);
    }

    sgd_step(state, grad, lr);
    forward_passes += grad.forward_passes;
    if (step % config.eval_every == 0 || step == config.steps) record(step);
  }
  return {std::move(state), std::move(history)};
}

double eval_pair_accuracy(const EmbeddingState& state, const Dataset& ds,
                          std::optional<double> theta_override) {
  const std::size_t m = ds.size();
  if (m < 2) throw std::invalid_argument("eval_pair_accuracy: need m >= 2");
  const double theta = theta_override.value_or(state.theta);

  Mat inputs(m, ds.feature_dim);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = ds.sample(i);
    std::copy(row.begin(), row.end(), inputs.row(i));
  }
  const Mat sigs = forward_batch(state, inputs).signatures();

  std::size_t correct = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const bool predicted_same =
          kernels::sq_dist(sigs.row(i), sigs.row(j), sigs.cols) < theta;
      if (predicted_same == (ds.labels[i] == ds.labels[j])) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(m * m - m);
}

}  // namespace mb
