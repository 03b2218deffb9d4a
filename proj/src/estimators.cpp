#include "mb/estimators.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mb {

namespace {

Mat gather_rows(const Dataset& ds, std::span<const std::size_t> idx) {
  Mat out(idx.size(), ds.feature_dim);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto row = ds.sample(idx[i]);
    std::copy(row.begin(), row.end(), out.row(i));
  }
  return out;
}

// Forward the selected samples once, accumulate the scaled pair subgradients
// into per-sample signature-gradient rows, then run one batched backward.
GradientEstimate pair_sum_gradient(const EmbeddingState& state,
                                   const Dataset& ds,
                                   std::span<const std::size_t> rows,
                                   std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                   double scale,
                                   const PairWeighting& weighting) {
  const BatchActivations acts = forward_batch(state, gather_rows(ds, rows));
  const Mat& sigs = acts.signatures();

  Mat sig_grads(rows.size(), sigs.cols);
  double gtheta = 0.0;
  for (const auto& [a, b] : pairs) {
    const bool same = ds.labels[rows[a]] == ds.labels[rows[b]];
    accumulate_pair_grad(state.theta, sigs.row_span(a), sigs.row_span(b), same,
                         weighting.of(same), scale, sig_grads.row(a),
                         sig_grads.row(b), gtheta);
  }

  GradientEstimate est;
  est.grad = backward_batch(state, acts, sig_grads);
  est.grad.push_back(gtheta);
  est.forward_passes = rows.size();
  require_finite(est.grad, "gradient estimate");
  return est;
}

std::vector<std::pair<std::size_t, std::size_t>> all_ordered_pairs(
    std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * n - n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  return pairs;
}

}  // namespace

std::string_view estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::full: return "full";
    case EstimatorKind::pairwise_minibatch: return "pairwise";
    case EstimatorKind::multibatch: return "multibatch";
  }
  return "?";
}

GradientEstimate multibatch_on_indices(const EmbeddingState& state,
                                       const Dataset& ds,
                                       std::span<const std::size_t> idx,
                                       const PairWeighting& weighting) {
  const std::size_t n = idx.size();
  if (n < 2)
    throw std::invalid_argument("multibatch: need at least two samples");
  const double scale = 1.0 / static_cast<double>(n * n - n);
  GradientEstimate est =
      pair_sum_gradient(state, ds, idx, all_ordered_pairs(n), scale, weighting);
  est.kind = EstimatorKind::multibatch;
  est.k = n;
  return est;
}

GradientEstimate full_gradient(const EmbeddingState& state, const Dataset& ds,
                               const PairWeighting& weighting) {
  if (ds.size() < 2)
    throw std::invalid_argument("full_gradient: need at least two samples");
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  GradientEstimate est = multibatch_on_indices(state, ds, idx, weighting);
  est.kind = EstimatorKind::full;
  est.k = ds.size();
  return est;
}

GradientEstimate multibatch_estimate(const EmbeddingState& state,
                                     const Dataset& ds, std::size_t k,
                                     const PairWeighting& weighting,
                                     Rng& rng) {
  if (k < 2 || k > ds.size())
    throw std::invalid_argument("multibatch: k=" + std::to_string(k) +
                                " outside [2, m=" + std::to_string(ds.size()) +
                                "]");
  std::vector<std::size_t> idx = rng.shuffle_k(ds.size(), k);
  // The estimate depends only on the sampled set; canonical order makes the
  // k == m case coincide bit-for-bit with full_gradient.
  std::sort(idx.begin(), idx.end());
  return multibatch_on_indices(state, ds, idx, weighting);
}

GradientEstimate pairwise_on_indices(const EmbeddingState& state,
                                     const Dataset& ds,
                                     std::span<const std::size_t> pool,
                                     std::size_t k,
                                     const PairWeighting& weighting,
                                     Rng& rng) {
  if (k < 2 || k % 2 != 0)
    throw std::invalid_argument("pairwise: k must be even and >= 2");
  if (pool.size() < 2)
    throw std::invalid_argument("pairwise: need at least two samples");
  const std::size_t num_pairs = k / 2;

  // One forward slot per drawn pair member; duplicates are forwarded again,
  // keeping the cost contract at exactly k forward passes.
  std::vector<std::size_t> rows(k);
  std::vector<std::pair<std::size_t, std::size_t>> pairs(num_pairs);
  for (std::size_t p = 0; p < num_pairs; ++p) {
    const std::size_t a = rng.uniform_int(pool.size());
    std::size_t b = rng.uniform_int(pool.size() - 1);
    if (b >= a) ++b;
    rows[2 * p] = pool[a];
    rows[2 * p + 1] = pool[b];
    pairs[p] = {2 * p, 2 * p + 1};
  }
  const double scale = 1.0 / static_cast<double>(num_pairs);
  GradientEstimate est =
      pair_sum_gradient(state, ds, rows, pairs, scale, weighting);
  est.kind = EstimatorKind::pairwise_minibatch;
  est.k = k;
  return est;
}

GradientEstimate pairwise_estimate(const EmbeddingState& state,
                                   const Dataset& ds, std::size_t k,
                                   const PairWeighting& weighting, Rng& rng) {
  std::vector<std::size_t> pool(ds.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  return pairwise_on_indices(state, ds, pool, k, weighting, rng);
}

}  // namespace mb
