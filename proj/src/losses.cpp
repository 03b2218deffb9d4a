#include "mb/losses.hpp"

#include <stdexcept>
#include <string>

#include "mb/kernels.hpp"

namespace mb {

PairWeighting PairWeighting::balanced(std::size_t same_pairs,
                                      std::size_t not_same_pairs) {
  PairWeighting w;
  w.same = 1.0;
  w.not_same = not_same_pairs == 0 ? 0.0
                                   : static_cast<double>(same_pairs) /
                                         static_cast<double>(not_same_pairs);
  return w;
}

PairWeighting PairWeighting::balanced_for(std::span<const int> labels) {
  const auto [same, not_same] = ordered_pair_counts(labels);
  return balanced(same, not_same);
}

std::pair<std::size_t, std::size_t> ordered_pair_counts(
    std::span<const int> labels) {
  const std::size_t m = labels.size();
  std::size_t same = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && labels[i] == labels[j]) ++same;
  return {same, m * (m - 1) - same};
}

double pair_loss(double theta, std::span<const double> sig_i,
                 std::span<const double> sig_j, bool same, double weight) {
  const double d2 = sq_dist(sig_i, sig_j);
  const double y = same ? 1.0 : -1.0;
  const double arg = 1.0 - y * (theta - d2);
  return arg > 0.0 ? weight * arg : 0.0;
}

PairLossGrad pair_loss_grad(double theta, std::span<const double> sig_i,
                            std::span<const double> sig_j, bool same,
                            double weight) {
  PairLossGrad g;
  g.dsig_i.assign(sig_i.size(), 0.0);
  g.dsig_j.assign(sig_j.size(), 0.0);
  g.active = accumulate_pair_grad(theta, sig_i, sig_j, same, weight, 1.0,
                                  g.dsig_i.data(), g.dsig_j.data(), g.dtheta);
  return g;
}

bool accumulate_pair_grad(double theta, std::span<const double> sig_i,
                          std::span<const double> sig_j, bool same,
                          double weight, double scale, double* gsig_i,
                          double* gsig_j, double& gtheta) {
  const double d2 = sq_dist(sig_i, sig_j);
  const double y = same ? 1.0 : -1.0;
  if (1.0 - y * (theta - d2) <= 0.0) return false;  // inactive, subgradient 0
  const double coeff = 2.0 * scale * weight * y;
  kernels::diff_axpy(coeff, sig_i.data(), sig_j.data(), gsig_i, sig_i.size());
  kernels::diff_axpy(-coeff, sig_i.data(), sig_j.data(), gsig_j, sig_j.size());
  gtheta -= scale * weight * y;
  return true;
}

bool sns_satisfied(double theta, std::span<const double> sig_i,
                   std::span<const double> sig_j, bool same) {
  const double d2 = sq_dist(sig_i, sig_j);
  return same ? d2 < theta - 1.0 : d2 > theta + 1.0;
}

double objective_on_indices(const EmbeddingState& state, const Dataset& ds,
                            std::span<const std::size_t> idx,
                            const PairWeighting& weighting) {
  const std::size_t n = idx.size();
  if (n < 2)
    throw std::invalid_argument("objective needs at least two samples");
  Mat inputs(n, ds.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = ds.sample(idx[i]);
    std::copy(row.begin(), row.end(), inputs.row(i));
  }
  const Mat sigs = forward_batch(state, inputs).signatures();

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool same = ds.labels[idx[i]] == ds.labels[idx[j]];
      total += pair_loss(state.theta, sigs.row_span(i), sigs.row_span(j), same,
                         weighting.of(same));
    }
  }
  return total / static_cast<double>(n * n - n);
}

double full_objective(const EmbeddingState& state, const Dataset& ds,
                      const PairWeighting& weighting) {
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return objective_on_indices(state, ds, idx, weighting);
}

double multiclass_hinge(const MulticlassHead& head, const Mat& signatures,
                        std::span<const int> labels) {
  if (signatures.rows != labels.size())
    throw std::invalid_argument("multiclass_hinge: signature/label count mismatch");
  if (head.weights.rows != head.bias.size())
    throw std::invalid_argument("multiclass_hinge: head weight/bias mismatch");
  const std::size_t num_classes = head.weights.rows;
  double total = 0.0;
  for (std::size_t i = 0; i < signatures.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("multiclass_hinge: label " +
                                  std::to_string(y) + " out of range");
    const double* s = signatures.row(i);
    const double own =
        kernels::dot(head.weights.row(y), s, signatures.cols) + head.bias[y];
    double best = 0.0;  // t == y contributes exactly 0
    for (std::size_t t = 0; t < num_classes; ++t) {
      if (static_cast<int>(t) == y) continue;
      const double score =
          1.0 + kernels::dot(head.weights.row(t), s, signatures.cols) +
          head.bias[t] - own;
      if (score > best) best = score;
    }
    total += best;
  }
  return total;
}

MulticlassHead construct_multiclass_head(const Mat& signatures,
                                         std::span<const int> labels,
                                         int num_classes) {
  if (signatures.rows != labels.size())
    throw std::invalid_argument("construct_multiclass_head: signature/label count mismatch");
  if (num_classes <= 0)
    throw std::invalid_argument("construct_multiclass_head: no classes");
  MulticlassHead head;
  head.weights = Mat(num_classes, signatures.cols);
  head.bias.assign(num_classes, 0.0);
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < signatures.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("construct_multiclass_head: label out of range");
    ++counts[y];
    kernels::axpy(1.0, signatures.row(i), head.weights.row(y),
                  signatures.cols);
    head.bias[y] -=
        0.5 * kernels::dot(signatures.row(i), signatures.row(i),
                           signatures.cols);
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[c] == 0)
      throw std::invalid_argument("construct_multiclass_head: class " +
                                  std::to_string(c) + " has no samples");
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t j = 0; j < signatures.cols; ++j)
      head.weights.at(c, j) *= inv;
    head.bias[c] *= inv;
  }
  return head;
}

}  // namespace mb
