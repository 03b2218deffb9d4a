#pragma once
// SGD training loop with pluggable gradient estimator, class-balanced batch
// composition, a step-indexed learning-rate schedule, and an instrumented
// history for equal-budget convergence comparisons.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mb/dataio.hpp"
#include "mb/estimators.hpp"

namespace mb {

struct LrDrop {
  std::size_t step;  // takes effect once this many steps have completed
  double lr;
};

enum class BatchWeighting { unit, balanced };

struct TrainConfig {
  EstimatorKind estimator = EstimatorKind::multibatch;
  std::size_t classes_per_batch = 4;
  std::size_t samples_per_class = 4;
  double lr = 0.01;
  std::vector<LrDrop> lr_drops;
  std::size_t steps = 2000;
  std::size_t eval_every = 100;
  std::uint64_t seed = 42;
  // Per-batch pair weights: `balanced` equalizes the aggregate same and
  // not-same contributions of the realized batch composition.
  BatchWeighting weighting = BatchWeighting::balanced;

  std::size_t batch_size() const {
    return classes_per_batch * samples_per_class;
  }
  void validate(const Dataset& ds) const;
};

struct HistoryRow {
  std::size_t step = 0;
  std::size_t forward_passes = 0;  // cumulative embedding evaluations
  double objective = 0.0;          // unit-weight all-pairs objective
  double accuracy = 0.0;           // all-pairs same/not-same accuracy
};

struct TrainHistory {
  std::vector<HistoryRow> rows;

  // First row where objective <= target, if any.
  std::optional<HistoryRow> first_below(double target) const;
};

// CSV rows: step,forward_passes,objective,accuracy
void write_history_csv(std::ostream& out, const TrainHistory& history);

// c * p indices: p samples (without replacement) from each of c distinct
// classes, drawn uniformly among classes that have at least p samples.
// Throws if fewer than c classes qualify.
std::vector<std::size_t> compose_batch(const Dataset& ds, std::size_t c,
                                       std::size_t p, Rng& rng);

// z <- z - lr * grad, theta included.
void sgd_step(EmbeddingState& state, const GradientEstimate& grad, double lr);

// Runs config.steps iterations of compose-batch -> estimate -> sgd_step.
// History is recorded every eval_every steps and at the final step. Batch
// composition and pair sampling draw from two streams derived from the seed,
// so runs that differ only in estimator see identical batch sequences.
std::pair<EmbeddingState, TrainHistory> train(const EmbeddingState& initial,
                                              const Dataset& ds,
                                              const TrainConfig& config);

// Fraction of ordered pairs where (squared distance < theta) matches the
// same/not-same ground truth.
double eval_pair_accuracy(const EmbeddingState& state, const Dataset& ds,
                          std::optional<double> theta_override = {});

}  // namespace mb
