#include "mb/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mb/kernels.hpp"

namespace mb {

namespace {

struct LayerView {
  const double* w;  // out x in, row-major
  const double* b;  // out
  std::size_t in, out;
  std::size_t w_off, b_off;
};

LayerView layer_view(const EmbeddingState& state, std::size_t l) {
  std::size_t off = 0;
  for (std::size_t q = 0; q < l; ++q) {
    const std::size_t in = state.spec.dims[q], out = state.spec.dims[q + 1];
    off += out * in + out;
  }
  const std::size_t in = state.spec.dims[l], out = state.spec.dims[l + 1];
  return {state.weights.data() + off, state.weights.data() + off + out * in,
          in, out, off, off + out * in};
}

bool relu_after(const ModelSpec& spec, std::size_t l) {
  return spec.kind == ModelKind::mlp && l + 1 < spec.layer_count();
}

}  // namespace

void ModelSpec::validate() const {
  if (dims.size() < 2)
    throw std::invalid_argument("model spec needs at least input and output dims");
  for (std::size_t d : dims)
    if (d == 0) throw std::invalid_argument("model dims must be positive");
  if (kind == ModelKind::linear && dims.size() != 2)
    throw std::invalid_argument("linear model has exactly two dims");
}

std::size_t weight_count(const ModelSpec& spec) {
  spec.validate();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < spec.dims.size(); ++l)
    n += spec.dims[l + 1] * spec.dims[l] + spec.dims[l + 1];
  return n;
}

EmbeddingState init_state(const ModelSpec& spec, Rng& rng) {
  EmbeddingState state;
  state.spec = spec;
  state.weights.assign(weight_count(spec), 0.0);
  state.theta = 1.0;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.dims.size(); ++l) {
    const std::size_t in = spec.dims[l], out = spec.dims[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < out * in; ++i)
      state.weights[off + i] = rng.uniform(-a, a);
    off += out * in + out;  // biases stay zero
  }
  return state;
}

EmbeddingState make_identity_linear(std::size_t dim, double theta) {
  EmbeddingState state;
  state.spec = {ModelKind::linear, {dim, dim}};
  state.weights.assign(weight_count(state.spec), 0.0);
  for (std::size_t i = 0; i < dim; ++i) state.weights[i * dim + i] = 1.0;
  state.theta = theta;
  return state;
}

Vec forward(const EmbeddingState& state, std::span<const double> x) {
  state.spec.validate();
  if (x.size() != state.spec.input_dim())
    throw std::invalid_argument("forward: input has " +
                                std::to_string(x.size()) + " entries, model expects " +
                                std::to_string(state.spec.input_dim()));
  Vec cur(x.begin(), x.end());
  for (std::size_t l = 0; l < state.spec.layer_count(); ++l) {
    const LayerView lv = layer_view(state, l);
    Vec next(lv.out);
    for (std::size_t r = 0; r < lv.out; ++r)
      next[r] = kernels::dot(lv.w + r * lv.in, cur.data(), lv.in) + lv.b[r];
    if (relu_after(state.spec, l))
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    cur = std::move(next);
  }
  return cur;
}

BatchActivations forward_batch(const EmbeddingState& state, const Mat& inputs) {
  state.spec.validate();
  if (inputs.cols != state.spec.input_dim())
    throw std::invalid_argument("forward_batch: input dim mismatch");
  BatchActivations acts;
  acts.layer_out.reserve(state.spec.layer_count() + 1);
  acts.layer_out.push_back(inputs);
  for (std::size_t l = 0; l < state.spec.layer_count(); ++l) {
    const LayerView lv = layer_view(state, l);
    const Mat& prev = acts.layer_out.back();
    Mat next(prev.rows, lv.out);
    for (std::size_t i = 0; i < prev.rows; ++i) {
      double* out_row = next.row(i);
      const double* in_row = prev.row(i);
      for (std::size_t r = 0; r < lv.out; ++r)
        out_row[r] = kernels::dot(lv.w + r * lv.in, in_row, lv.in) + lv.b[r];
      if (relu_after(state.spec, l))
        for (std::size_t r = 0; r < lv.out; ++r)
          if (out_row[r] < 0.0) out_row[r] = 0.0;
    }
    acts.layer_out.push_back(std::move(next));
  }
  return acts;
}

void backward_sample(const EmbeddingState& state, const BatchActivations& acts,
                     std::size_t sample, std::span<const double> sig_grad,
                     Vec& accum) {
  const std::size_t layers = state.spec.layer_count();
  if (acts.layer_out.size() != layers + 1)
    throw std::invalid_argument("backward_sample: activation cache does not match model");
  if (sample >= acts.batch_size())
    throw std::invalid_argument("backward_sample: sample index out of range");
  if (sig_grad.size() != state.spec.signature_dim())
    throw std::invalid_argument("backward_sample: signature gradient dim mismatch");
  if (accum.size() != weight_count(state.spec))
    throw std::invalid_argument("backward_sample: accumulator length mismatch");

  Vec g(sig_grad.begin(), sig_grad.end());
  for (std::size_t l = layers; l-- > 0;) {
    const LayerView lv = layer_view(state, l);
    // Post-activation output of this layer; for hidden ReLU layers the
    // stored value is max(z, 0), so out > 0 identifies the active units
    // (the z == 0 kink deliberately counts as inactive).
    const double* out_row = acts.layer_out[l + 1].row(sample);
    if (relu_after(state.spec, l))
      for (std::size_t r = 0; r < lv.out; ++r)
        if (out_row[r] <= 0.0) g[r] = 0.0;

    const double* in_row = acts.layer_out[l].row(sample);
    double* dw = accum.data() + lv.w_off;
    double* db = accum.data() + lv.b_off;
    Vec g_prev(lv.in, 0.0);
    for (std::size_t r = 0; r < lv.out; ++r) {
      if (g[r] != 0.0) {
        kernels::axpy(g[r], in_row, dw + r * lv.in, lv.in);
        kernels::axpy(g[r], lv.w + r * lv.in, g_prev.data(), lv.in);
      }
      db[r] += g[r];
    }
    g = std::move(g_prev);
  }
}

Vec backward_batch(const EmbeddingState& state, const BatchActivations& acts,
                   const Mat& sig_grads) {
  if (sig_grads.rows != acts.batch_size())
    throw std::invalid_argument("backward_batch: signature gradients misaligned with cache");
  Vec accum(weight_count(state.spec), 0.0);
  for (std::size_t i = 0; i < sig_grads.rows; ++i)
    backward_sample(state, acts, i, sig_grads.row_span(i), accum);
  return accum;
}

double min_relu_clearance(const EmbeddingState& state, const Mat& inputs) {
  double clearance = std::numeric_limits<double>::infinity();
  BatchActivations acts;
  acts.layer_out.push_back(inputs);
  for (std::size_t l = 0; l < state.spec.layer_count(); ++l) {
    const LayerView lv = layer_view(state, l);
    const Mat& prev = acts.layer_out.back();
    Mat next(prev.rows, lv.out);
    for (std::size_t i = 0; i < prev.rows; ++i) {
      double* out_row = next.row(i);
      for (std::size_t r = 0; r < lv.out; ++r)
        out_row[r] =
            kernels::dot(lv.w + r * lv.in, prev.row(i), lv.in) + lv.b[r];
      if (relu_after(state.spec, l)) {
        for (std::size_t r = 0; r < lv.out; ++r) {
          clearance = std::min(clearance, std::abs(out_row[r]));
          if (out_row[r] < 0.0) out_row[r] = 0.0;
        }
      }
    }
    acts.layer_out.push_back(std::move(next));
  }
  return clearance;
}

double finite_diff_check(const EmbeddingState& state, const Mat& inputs,
                         const SignatureProbe& probe, double step) {
  const BatchActivations acts = forward_batch(state, inputs);
  const Mat sig_grads = probe.grad(acts.signatures());
  const Vec analytic = backward_batch(state, acts, sig_grads);

  EmbeddingState probe_state = state;
  double worst = 0.0;
  for (std::size_t p = 0; p < probe_state.weights.size(); ++p) {
    const double saved = probe_state.weights[p];
    probe_state.weights[p] = saved + step;
    const double up = probe.value(forward_batch(probe_state, inputs).signatures());
    probe_state.weights[p] = saved - step;
    const double down = probe.value(forward_batch(probe_state, inputs).signatures());
    probe_state.weights[p] = saved;
    const double cd = (up - down) / (2.0 * step);
    const double denom =
        std::max({std::abs(analytic[p]), std::abs(cd), 1e-8});
    worst = std::max(worst, std::abs(analytic[p] - cd) / denom);
  }
  return worst;
}

}  // namespace mb
