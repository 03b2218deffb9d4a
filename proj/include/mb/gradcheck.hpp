#pragma once
// Gradient verification harness shared by the CLI and the acceptance suite.

#include <cstdint>

#include "mb/dataio.hpp"
#include "mb/estimators.hpp"
#include "mb/losses.hpp"
#include "mb/model.hpp"

namespace mb {

// Pair hinge over consecutive batch rows at a fixed threshold. Pair losses
// are translation-invariant in the signatures, so bias gradients are exactly
// zero and their central differences carry nothing but rounding noise of
// order ulp(probe value) / (2 step); the small default weight keeps that
// noise far below the relative-error floor.
SignatureProbe pair_hinge_probe(double theta, double weight = 0.001);

struct CheckableConfig {
  EmbeddingState state;
  Mat inputs;
};

// Draws (state, inputs) until every ReLU pre-activation and probe hinge
// argument clears the kink by at least `clearance` and every hidden unit is
// active for some input. Subgradients at kinks are one-sided, so finite
// differences are only meaningful away from them.
CheckableConfig draw_checkable_config(const ModelSpec& spec,
                                      std::size_t batch_size, double theta,
                                      double clearance, Rng& rng);

// Max over parameters (theta included) of the relative disagreement between
// full_gradient and central finite differences of full_objective.
double full_gradient_fd_error(const EmbeddingState& state, const Dataset& ds,
                              const PairWeighting& weighting,
                              double step = 1e-5);

}  // namespace mb
