#include "mb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mb {

namespace {

bool probe_pair_same(std::size_t i) { return i % 4 == 0; }

double min_hinge_clearance(const EmbeddingState& state, const Mat& inputs,
                           double theta) {
  const Mat sigs = forward_batch(state, inputs).signatures();
  double clearance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < sigs.rows; i += 2) {
    const double d2 = sq_dist(sigs.row_span(i), sigs.row_span(i + 1));
    const double y = probe_pair_same(i) ? 1.0 : -1.0;
    clearance = std::min(clearance, std::abs(1.0 - y * (theta - d2)));
  }
  return clearance;
}

bool has_dead_hidden_unit(const EmbeddingState& state, const Mat& inputs) {
  if (state.spec.kind != ModelKind::mlp) return false;
  const BatchActivations acts = forward_batch(state, inputs);
  for (std::size_t l = 1; l + 1 < acts.layer_out.size(); ++l) {
    const Mat& hidden = acts.layer_out[l];
    for (std::size_t r = 0; r < hidden.cols; ++r) {
      bool active = false;
      for (std::size_t i = 0; i < hidden.rows && !active; ++i)
        active = hidden.at(i, r) > 0.0;
      if (!active) return true;
    }
  }
  return false;
}

}  // namespace

SignatureProbe pair_hinge_probe(double theta, double weight) {
  SignatureProbe probe;
  probe.value = [theta, weight](const Mat& sigs) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < sigs.rows; i += 2)
      total += pair_loss(theta, sigs.row_span(i), sigs.row_span(i + 1),
                         probe_pair_same(i), weight);
    return total;
  };
  probe.grad = [theta, weight](const Mat& sigs) {
    Mat grads(sigs.rows, sigs.cols);
    for (std::size_t i = 0; i + 1 < sigs.rows; i += 2) {
      const PairLossGrad g =
          pair_loss_grad(theta, sigs.row_span(i), sigs.row_span(i + 1),
                         probe_pair_same(i), weight);
      for (std::size_t r = 0; r < sigs.cols; ++r) {
        grads.at(i, r) += g.dsig_i[r];
        grads.at(i + 1, r) += g.dsig_j[r];
      }
    }
    return grads;
  };
  return probe;
}

CheckableConfig draw_checkable_config(const ModelSpec& spec,
                                      std::size_t batch_size, double theta,
                                      double clearance, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    CheckableConfig cfg;
    cfg.state = init_state(spec, rng);
    cfg.inputs = Mat(batch_size, spec.input_dim());
    for (double& v : cfg.inputs.data) v = rng.uniform(-1.5, 1.5);
    if (min_relu_clearance(cfg.state, cfg.inputs) < clearance) continue;
    if (min_hinge_clearance(cfg.state, cfg.inputs, theta) < clearance)
      continue;
    if (has_dead_hidden_unit(cfg.state, cfg.inputs)) continue;
    return cfg;
  }
  throw std::runtime_error("draw_checkable_config: no clean draw in 1000 attempts");
}

double full_gradient_fd_error(const EmbeddingState& state, const Dataset& ds,
                              const PairWeighting& weighting, double step) {
  const GradientEstimate full = full_gradient(state, ds, weighting);
  EmbeddingState probe = state;
  double worst = 0.0;
  const auto compare = [&](double analytic, double up, double down) {
    const double cd = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(cd), 1e-8});
    worst = std::max(worst, std::abs(analytic - cd) / denom);
  };
  for (std::size_t p = 0; p < probe.weights.size(); ++p) {
    const double saved = probe.weights[p];
    probe.weights[p] = saved + step;
    const double up = full_objective(probe, ds, weighting);
    probe.weights[p] = saved - step;
    const double down = full_objective(probe, ds, weighting);
    probe.weights[p] = saved;
    compare(full.grad[p], up, down);
  }
  probe.theta = state.theta + step;
  const double up = full_objective(probe, ds, weighting);
  probe.theta = state.theta - step;
  const double down = full_objective(probe, ds, weighting);
  compare(full.grad.back(), up, down);
  return worst;
}

}  // namespace mb
