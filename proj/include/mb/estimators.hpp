#pragma once
// Three interchangeable gradient estimators for the all-pairs objective:
//
//  full      - exact gradient over all m^2-m ordered pairs.
//  pairwise  - classic minibatch: k/2 ordered pairs drawn i.i.d. (with
//              replacement across pairs), their pair gradients averaged.
//  multibatch - k distinct samples drawn without replacement; gradient of
//              the average loss over all k^2-k ordered pairs among them.
//
// Both sampled estimators are unbiased for the full gradient and spend the
// same budget of k embedding forward passes; multibatch extracts k^2-k pair
// terms from it instead of k/2. Signature gradients are accumulated per
// sample first and backpropagated in a single batch pass, so the pair loop
// costs O(k^2 d) with no extra network passes.

#include <cstdint>
#include <span>
#include <string_view>

#include "mb/dataio.hpp"
#include "mb/losses.hpp"
#include "mb/model.hpp"
#include "mb/rng.hpp"

namespace mb {

enum class EstimatorKind { full, pairwise_minibatch, multibatch };

std::string_view estimator_name(EstimatorKind kind);

// Flat parameter-aligned gradient: weight gradients in model layout, the
// theta derivative last.
struct GradientEstimate {
  Vec grad;
  EstimatorKind kind = EstimatorKind::full;
  std::size_t k = 0;
  std::size_t forward_passes = 0;

  double theta_grad() const { return grad.back(); }
};

GradientEstimate full_gradient(const EmbeddingState& state, const Dataset& ds,
                               const PairWeighting& weighting);

// k even, k >= 2. Draws k/2 ordered pairs (distinct within a pair) uniformly
// from the whole dataset.
GradientEstimate pairwise_estimate(const EmbeddingState& state,
                                   const Dataset& ds, std::size_t k,
                                   const PairWeighting& weighting, Rng& rng);

// 2 <= k <= m. Samples the first k entries of a uniform random permutation.
GradientEstimate multibatch_estimate(const EmbeddingState& state,
                                     const Dataset& ds, std::size_t k,
                                     const PairWeighting& weighting, Rng& rng);

// All-pairs gradient restricted to the given samples (deterministic).
GradientEstimate multibatch_on_indices(const EmbeddingState& state,
                                       const Dataset& ds,
                                       std::span<const std::size_t> idx,
                                       const PairWeighting& weighting);

// Pairwise estimator with its k/2 pairs drawn from the given pool.
GradientEstimate pairwise_on_indices(const EmbeddingState& state,
                                     const Dataset& ds,
                                     std::span<const std::size_t> pool,
                                     std::size_t k,
                                     const PairWeighting& weighting, Rng& rng);

}  // namespace mb
