#pragma once
// Small embedding models: a linear map and an MLP with ReLU hidden layers.
// Forward evaluation plus reverse-mode parameter gradients given upstream
// signature gradients.
//
// Flat parameter layout, fixed so gradient vectors are comparable across
// estimators: for each layer in order, the weight matrix (row-major,
// out x in) followed by the bias vector; the global threshold theta is a
// separate trainable scalar that gradient vectors carry as their last entry.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mb/rng.hpp"
#include "mb/tensor.hpp"

namespace mb {

enum class ModelKind { linear, mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  std::vector<std::size_t> dims;  // input dim first, signature dim last

  std::size_t input_dim() const { return dims.front(); }
  std::size_t signature_dim() const { return dims.back(); }
  std::size_t layer_count() const { return dims.size() - 1; }
  // Throws unless there are >= 2 positive dims (exactly 2 for linear).
  void validate() const;
};

std::size_t weight_count(const ModelSpec& spec);

struct EmbeddingState {
  ModelSpec spec;
  Vec weights;         // layout above, length weight_count(spec)
  double theta = 1.0;  // global decision threshold, trainable

  std::size_t param_len() const { return weights.size() + 1; }
};

// Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)) per layer,
// biases zero, theta 1.0 (so the same-pair margin theta-1 starts at zero and
// training has to learn the separation).
EmbeddingState init_state(const ModelSpec& spec, Rng& rng);

EmbeddingState make_identity_linear(std::size_t dim, double theta = 1.0);

// Per-sample layer outputs cached by forward_batch for backprop.
// layer_out[0] is the input batch, layer_out[L] the signatures.
struct BatchActivations {
  std::vector<Mat> layer_out;

  std::size_t batch_size() const {
    return layer_out.empty() ? 0 : layer_out.front().rows;
  }
  const Mat& signatures() const { return layer_out.back(); }
};

Vec forward(const EmbeddingState& state, std::span<const double> x);

BatchActivations forward_batch(const EmbeddingState& state, const Mat& inputs);

// Accumulates this sample's parameter gradient (J_i^T sig_grad) into accum,
// which must have length weight_count(spec). ReLU subgradient at 0 is 0.
void backward_sample(const EmbeddingState& state, const BatchActivations& acts,
                     std::size_t sample, std::span<const double> sig_grad,
                     Vec& accum);

// Sum of per-sample contributions; sig_grads rows align with the batch.
Vec backward_batch(const EmbeddingState& state, const BatchActivations& acts,
                   const Mat& sig_grads);

// A scalar loss over the signature batch together with its analytic
// signature gradients, used to probe backprop against finite differences.
struct SignatureProbe {
  std::function<double(const Mat& signatures)> value;
  std::function<Mat(const Mat& signatures)> grad;
};

// Max over parameters of |analytic - central difference| /
// max(|analytic|, |cd|, 1e-8).
double finite_diff_check(const EmbeddingState& state, const Mat& inputs,
                         const SignatureProbe& probe, double step = 1e-5);

// Smallest |pre-activation| over all hidden ReLU units for this batch
// (infinity for models without hidden layers). Gradient checks use this to
// keep finite-difference probes away from the kinks.
double min_relu_clearance(const EmbeddingState& state, const Mat& inputs);

}  // namespace mb
