#pragma once
// Estimator variance measurement and the second-moment machinery behind it:
// the exact per-pair gradient table, the single-pair ("vanilla") variance,
// the row-mean second-moment term, the multibatch variance bound built from
// them, empirical variance against the exact gradient, exhaustive
// enumeration over ordered k-subsequences, and a diagnostic that splits the
// variance by how the two pair draws share indices.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "mb/dataio.hpp"
#include "mb/estimators.hpp"

namespace mb {

// Exact gradient of every ordered pair's loss, plus the full gradient.
// The centered rows (pair gradient minus full gradient) average to zero
// over ordered pairs by construction.
struct PairGradTable {
  std::size_t m = 0;
  std::size_t param_len = 0;  // weight count + 1 (theta last)
  Vec full_grad;
  Mat pair_grads;  // (m*m) x param_len, row a*m+b holds pair (a, b)

  std::span<const double> pair(std::size_t a, std::size_t b) const {
    return pair_grads.row_span(a * m + b);
  }
};

// One forward pass over all m samples, then per-pair backprop contributions.
// Memory grows as m^2 * params; the guard rejects m > max_m.
PairGradTable build_pair_grad_table(const EmbeddingState& state,
                                    const Dataset& ds,
                                    const PairWeighting& weighting,
                                    std::size_t max_m = 200);

// Mean over ordered pairs of squared distance to the full gradient.
double vanilla_variance(const PairGradTable& table);

// Mean over samples of the squared per-sample row mean of centered pair
// gradients, summed over coordinates. Near zero when each sample's average
// pair gradient matches the full gradient (the "good metric" regime).
double abar_term(const PairGradTable& table);

// vanilla / (k^2-k) + (c3 / k) * abar. The k^3 count of index-sharing
// quadruples justifies c3 = 4 as a safe default.
double variance_bound(const PairGradTable& table, std::size_t k,
                      double c3 = 4.0);

// m * (m-1) * ... * (m-k+1), saturating at uint64 max.
std::uint64_t ordered_subsequence_count(std::size_t m, std::size_t k);

// Visits every length-k sequence of distinct indices from [0, m) in
// lexicographic order.
void for_each_ordered_subsequence(
    std::size_t m, std::size_t k,
    const std::function<void(std::span<const std::size_t>)>& fn);

// Average of the table's pair gradients over all ordered pairs within idx.
Vec subset_gradient(const PairGradTable& table,
                    std::span<const std::size_t> idx);

// Mean and variance of the subset gradient over every ordered k-subsequence.
Vec exhaustive_mean(const PairGradTable& table, std::size_t k);
double exhaustive_variance(const PairGradTable& table, std::size_t k);

// Same exhaustive mean, but through real estimator calls rather than the
// table, so it also exercises the forward/backward path.
Vec exhaustive_multibatch_mean(const EmbeddingState& state, const Dataset& ds,
                               std::size_t k, const PairWeighting& weighting);

struct VarianceReport {
  EstimatorKind kind = EstimatorKind::multibatch;
  std::size_t k = 0;
  std::size_t trials = 0;
  double empirical_variance = 0.0;
  double vanilla_variance = 0.0;
  double abar_term = 0.0;
  double bound_value = 0.0;
  double std_error = 0.0;  // of empirical_variance; not part of the CSV
};

// Mean squared deviation of `trials` estimates from the exact full gradient.
// Trial t draws from Rng(seed ^ t); trials may run on several threads, the
// reduction order is fixed, and results are identical for any thread count.
VarianceReport empirical_variance(EstimatorKind kind,
                                  const EmbeddingState& state,
                                  const Dataset& ds, std::size_t k,
                                  std::size_t trials, std::uint64_t seed,
                                  const PairWeighting& weighting,
                                  const PairGradTable* table = nullptr,
                                  unsigned threads = 1);

// CSV rows: estimator,k,trials,empirical_variance,vanilla_variance,
// abar_term,bound_value
void write_variance_csv(std::ostream& out,
                        std::span<const VarianceReport> reports);

// OLS slope of log(variance) against log(k). Throws on nonpositive variance
// or fewer than two points.
double variance_slope(std::span<const std::pair<double, double>> points);

// lhs = mean over ordered s != t of v_s * v_t, rhs = (mean of v)^2.
// holds is lhs <= rhs + 1e-12; true for every vector.
struct OffdiagProductCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};
OffdiagProductCheck offdiag_product_check(std::span<const double> v);

// Splits the variance by how the two pair draws overlap: `identical` for the
// same ordered pair twice, `disjoint` for four distinct indices, `shared`
// for everything in between (one shared index in any position, or the same
// pair reversed). The three terms always sum to the variance.
struct VarianceDecomposition {
  double identical = 0.0;
  double disjoint = 0.0;
  double shared = 0.0;
  bool exhaustive = false;
  std::size_t trials = 0;
  double std_error = 0.0;  // of the Monte Carlo total

  double total() const { return identical + disjoint + shared; }
};

// Exact expectations when the ordered k-subsequence count is within
// exhaustive_limit, otherwise Monte Carlo over `trials` sampled batches.
VarianceDecomposition decomposition_diagnostic(
    const PairGradTable& table, std::size_t k, std::uint64_t seed,
    std::size_t trials, std::uint64_t exhaustive_limit = 1000000);

}  // namespace mb
