#pragma once
// Pairwise hinge loss against a global threshold, the all-pairs objective,
// the same/not-same decision predicate, and the multiclass hinge loss with
// its mean-signature head construction.
//
// Pair loss: weight * max(0, 1 - y * (theta - ||s_i - s_j||^2)) with
// y = +1 for same-class pairs and -1 otherwise. The hinge subgradient at the
// kink is 0, matching the ReLU convention in the model.

#include <cstdint>
#include <span>
#include <utility>

#include "mb/dataio.hpp"
#include "mb/model.hpp"
#include "mb/tensor.hpp"

namespace mb {

struct PairWeighting {
  double same = 1.0;
  double not_same = 1.0;

  static PairWeighting unit() { return {}; }
  // not_same scaled so both pair populations contribute equally in aggregate.
  static PairWeighting balanced(std::size_t same_pairs,
                                std::size_t not_same_pairs);
  static PairWeighting balanced_for(std::span<const int> labels);

  double of(bool same_pair) const { return same_pair ? same : not_same; }
};

// (same, not_same) ordered pair counts for a label sequence.
std::pair<std::size_t, std::size_t> ordered_pair_counts(
    std::span<const int> labels);

double pair_loss(double theta, std::span<const double> sig_i,
                 std::span<const double> sig_j, bool same, double weight);

struct PairLossGrad {
  Vec dsig_i, dsig_j;
  double dtheta = 0.0;
  bool active = false;
};

PairLossGrad pair_loss_grad(double theta, std::span<const double> sig_i,
                            std::span<const double> sig_j, bool same,
                            double weight);

// Adds scale * d(pair_loss) to the caller's buffers (gsig_* length matches
// the signatures). Returns whether the hinge was active.
bool accumulate_pair_grad(double theta, std::span<const double> sig_i,
                          std::span<const double> sig_j, bool same,
                          double weight, double scale, double* gsig_i,
                          double* gsig_j, double& gtheta);

// True iff the pair satisfies its margin: same-class squared distance
// strictly below theta-1, different-class strictly above theta+1.
bool sns_satisfied(double theta, std::span<const double> sig_i,
                   std::span<const double> sig_j, bool same);

// Average weighted pair loss over all m^2-m ordered pairs. Requires m >= 2.
double full_objective(const EmbeddingState& state, const Dataset& ds,
                      const PairWeighting& weighting);
// Same, restricted to the given sample indices.
double objective_on_indices(const EmbeddingState& state, const Dataset& ds,
                            std::span<const std::size_t> idx,
                            const PairWeighting& weighting);

// Per-class linear scorer over signatures.
struct MulticlassHead {
  Mat weights;  // one row per class
  Vec bias;     // one entry per class
};

// sum_i max_t (1[t != y_i] + W_t . s_i + b_t - W_{y_i} . s_i - b_{y_i})
double multiclass_hinge(const MulticlassHead& head, const Mat& signatures,
                        std::span<const int> labels);

// W_k = mean signature of class k, b_k = -(mean squared norm of class k)/2.
// Whenever some threshold separates the classes with unit margins, this head
// scores them with zero multiclass hinge loss.
MulticlassHead construct_multiclass_head(const Mat& signatures,
                                         std::span<const int> labels,
                                         int num_classes);

}  // namespace mb
