#pragma once

// LSTM with forget gate, ReLU candidate/cell activations, many-to-one unrolling
// and a single-unit ReLU regression head. Exact gradients by BPTT.

#include "xferlos/core/common.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xferlos {

/// Column-block order along the 4H axis of kernel, recurrent kernel and bias.
enum class Gate : int { input = 0, forget = 1, candidate = 2, output = 3 };
inline constexpr std::string_view kGateOrder = "i,f,c,o";

/// Time-major batch: element t is an (m x n) matrix of inputs at step t.
using Sequence = std::vector<Matrix>;

struct LstmParams {
  Matrix kernel;            // n x 4H
  Matrix recurrent_kernel;  // H x 4H
  Matrix bias;              // 1 x 4H

  long units() const { return recurrent_kernel.rows(); }
  long inputs() const { return kernel.rows(); }

  static LstmParams zeros(long inputs, long units) {
    return {Matrix::Zero(inputs, 4 * units), Matrix::Zero(units, 4 * units), Matrix::Zero(1, 4 * units)};
  }

  void validate() const {
    const long h = units();
    if (h < 1) throw ValidationError("LSTM layer must have at least one hidden unit");
    check_dim("recurrent_kernel.cols", 4 * h, recurrent_kernel.cols());
    check_dim("kernel.cols", 4 * h, kernel.cols());
    check_dim("bias.rows", 1, bias.rows());
    check_dim("bias.cols", 4 * h, bias.cols());
  }
};

struct DenseParams {
  Matrix weight;  // H x 1
  Matrix bias;    // 1 x 1

  static DenseParams zeros(long units) { return {Matrix::Zero(units, 1), Matrix::Zero(1, 1)}; }

  void validate(long units) const {
    check_dim("dense.weight.rows", units, weight.rows());
    check_dim("dense.weight.cols", 1, weight.cols());
    check_dim("dense.bias.size", 1, bias.size());
  }
};

/// Hidden and cell state, one row per sequence in the batch.
struct CellState {
  Matrix h;
  Matrix c;

  static CellState zeros(long batch, long units) { return {Matrix::Zero(batch, units), Matrix::Zero(batch, units)}; }
};

struct ModelConfig {
  int hidden_units = 16;
  int num_layers = 1;
  double dropout_rate = 0.0;
  int timesteps = kTimesteps;

  void validate() const {
    if (hidden_units < 1) throw ValidationError("hidden_units must be >= 1");
    if (num_layers != 1 && num_layers != 2) throw ValidationError("num_layers must be 1 or 2");
    if (!(dropout_rate >= 0.0 && dropout_rate <= 0.5)) throw ValidationError("dropout_rate must lie in [0, 0.5]");
    if (timesteps != kTimesteps) throw ValidationError("timesteps must be 24");
  }
};

namespace detail {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// ReLU'(0) := 0.
inline Matrix relu_mask(const Matrix& z) { return (z.array() > 0.0).cast<double>().matrix(); }

inline void require_finite_preactivation(const Matrix& z, std::string_view where) {
  if (!z.allFinite()) throw NumericError("non-finite pre-activation in " + std::string(where));
}

}  // namespace detail

/// Gate activations of one step; kept for the backward pass.
struct StepActivations {
  Matrix input_gate, forget_gate, candidate, output_gate;
  Matrix cell;        // c_t
  Matrix hidden;      // h_t
};

/// One batched step: rows of `x` are sequences. `state` holds (h_{t-1}, c_{t-1}).
inline StepActivations lstm_step_batch(const Matrix& x, const CellState& state, const LstmParams& p) {
  const long h = p.units();
  check_dim("x.cols (input features)", p.inputs(), x.cols());
  check_dim("state.h.cols (hidden units)", h, state.h.cols());
  check_dim("state.c.cols (hidden units)", h, state.c.cols());
  check_dim("state.h.rows (batch)", x.rows(), state.h.rows());

  Matrix z = x * p.kernel;
  z.noalias() += state.h * p.recurrent_kernel;
  z.rowwise() += p.bias.row(0);
  detail::require_finite_preactivation(z, "lstm cell");

  auto sig = [](double v) { return detail::sigmoid(v); };
  StepActivations a;
  a.input_gate = z.middleCols(0 * h, h).unaryExpr(sig);
  a.forget_gate = z.middleCols(1 * h, h).unaryExpr(sig);
  a.candidate = z.middleCols(2 * h, h).cwiseMax(0.0);
  a.output_gate = z.middleCols(3 * h, h).unaryExpr(sig);
  a.cell = a.forget_gate.cwiseProduct(state.c) + a.input_gate.cwiseProduct(a.candidate);
  a.hidden = a.output_gate.cwiseProduct(a.cell.cwiseMax(0.0));
  return a;
}

/// Single-sequence cell step.
inline CellState lstm_cell_step(const Vector& x, const CellState& state, const LstmParams& params) {
  if (!state.h.allFinite() || !state.c.allFinite()) throw NumericError("cell state is not finite");
  Matrix xr = x.transpose();
  StepActivations a = lstm_step_batch(xr, state, params);
  return {std::move(a.hidden), std::move(a.cell)};
}

/// Uniform on [-L, L] with L = sqrt(6 / (rows + cols)).
inline Matrix glorot_init(long rows, long cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw ValidationError("glorot_init requires rows, cols >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) w(i, j) = uniform(rng, -limit, limit);
  return w;
}

/// Stacked LSTM layers plus the ReLU regression head.
struct LstmNetwork {
  std::vector<LstmParams> layers;
  DenseParams dense;
  double dropout_rate = 0.0;

  long inputs() const { return layers.front().inputs(); }
  long units() const { return layers.back().units(); }

  /// Cold start: Glorot kernels, recurrent kernels and head; forget-gate bias 1, other biases 0.
  static LstmNetwork initialize(long inputs, const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    if (inputs < 1) throw ValidationError("network needs at least one input feature");
    LstmNetwork net;
    net.dropout_rate = cfg.dropout_rate;
    long in = inputs;
    for (int l = 0; l < cfg.num_layers; ++l) {
      const long h = cfg.hidden_units;
      LstmParams p;
      p.kernel = glorot_init(in, 4 * h, rng);
      p.recurrent_kernel = glorot_init(h, 4 * h, rng);
      p.bias = Matrix::Zero(1, 4 * h);
      p.bias.middleCols(static_cast<int>(Gate::forget) * h, h).setConstant(1.0);
      net.layers.push_back(std::move(p));
      in = h;
    }
    net.dense.weight = glorot_init(cfg.hidden_units, 1, rng);
    net.dense.bias = Matrix::Zero(1, 1);
    return net;
  }

  void validate() const {
    if (layers.empty()) throw ValidationError("network has no LSTM layers");
    if (layers.size() > 2) throw ValidationError("at most two LSTM layers are supported");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].validate();
      if (l > 0) check_dim("layer kernel rows (stacked input)", layers[l - 1].units(), layers[l].inputs());
    }
    dense.validate(units());
  }

  /// All trainable tensors in a fixed order: per layer (kernel, recurrent, bias), then dense (weight, bias).
  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    for (auto& l : layers) {
      out.push_back(&l.kernel);
      out.push_back(&l.recurrent_kernel);
      out.push_back(&l.bias);
    }
    out.push_back(&dense.weight);
    out.push_back(&dense.bias);
    return out;
  }
  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> out;
    for (auto* p : const_cast<LstmNetwork*>(this)->parameters()) out.push_back(p);
    return out;
  }
};

/// Everything the backward pass needs from a forward evaluation.
struct ForwardCache {
  Sequence inputs;                                   // caller's batch
  std::vector<std::vector<StepActivations>> steps;   // [layer][t]
  Matrix dropout_mask;                               // m x H, already scaled by 1/(1-p); empty if unused
  Matrix head_input;                                 // m x H after dropout
  Matrix head_preactivation;                         // m x 1
  Vector predictions;                                // m
};

inline void validate_sequence(const Sequence& batch, long inputs) {
  check_dim("timesteps", kTimesteps, static_cast<long>(batch.size()));
  const long m = batch.front().rows();
  for (const auto& xt : batch) {
    check_dim("batch rows", m, xt.rows());
    check_dim("input features", inputs, xt.cols());
  }
  for (long i = 0; i < m; ++i)
    for (const auto& xt : batch)
      if (!xt.row(i).allFinite())
        throw ValidationError("non-finite input value in stay " + std::to_string(i));
}

/// Many-to-one forward pass: prediction = ReLU(w . h_24 + b) per sequence.
/// Dropout (inverted) is applied to h_24 only when `training` is set.
inline ForwardCache forward_cached(const Sequence& batch, const LstmNetwork& net, bool training, Rng* rng) {
  net.validate();
  validate_sequence(batch, net.inputs());
  const long m = batch.front().rows();

  ForwardCache cache;
  cache.inputs = batch;
  cache.steps.resize(net.layers.size());
  const Sequence* layer_in = &cache.inputs;
  Sequence hidden_seq;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& p = net.layers[l];
    CellState s = CellState::zeros(m, p.units());
    auto& steps = cache.steps[l];
    steps.reserve(kTimesteps);
    Sequence out;
    out.reserve(kTimesteps);
    for (int t = 0; t < kTimesteps; ++t) {
      steps.push_back(lstm_step_batch((*layer_in)[t], s, p));
      s.h = steps.back().hidden;
      s.c = steps.back().cell;
      out.push_back(s.h);
    }
    hidden_seq = std::move(out);
    layer_in = &hidden_seq;
  }

  const Matrix& last = cache.steps.back().back().hidden;
  cache.head_input = last;
  if (training && net.dropout_rate > 0.0) {
    if (rng == nullptr) throw ValidationError("dropout in training mode requires an rng");
    const double keep = 1.0 - net.dropout_rate;
    cache.dropout_mask.resize(m, last.cols());
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < last.cols(); ++j) cache.dropout_mask(i, j) = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
    cache.head_input = last.cwiseProduct(cache.dropout_mask);
  }
  cache.head_preactivation = cache.head_input * net.dense.weight;
  cache.head_preactivation.array() += net.dense.bias(0, 0);
  detail::require_finite_preactivation(cache.head_preactivation, "dense head");
  cache.predictions = cache.head_preactivation.col(0).cwiseMax(0.0);
  return cache;
}

inline Vector forward_many_to_one(const Sequence& batch, const LstmNetwork& net, bool training = false,
                                  Rng* rng = nullptr) {
  return forward_cached(batch, net, training, rng).predictions;
}

struct NetworkGradients {
  std::vector<LstmParams> layers;
  DenseParams dense;
  Sequence inputs;  // d(objective)/d(input), same shape as the batch

  /// Same order as LstmNetwork::parameters().
  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for (auto& l : layers) {
      out.push_back(&l.kernel);
      out.push_back(&l.recurrent_kernel);
      out.push_back(&l.bias);
    }
    out.push_back(&dense.weight);
    out.push_back(&dense.bias);
    return out;
  }
};

/// Backpropagation through time. `output_grad` is d(objective)/d(prediction), length m.
/// When `parameter_grads` is false only input gradients are produced.
inline NetworkGradients backward(const ForwardCache& cache, const LstmNetwork& net, const Vector& output_grad,
                                 bool parameter_grads = true) {
  const long m = cache.predictions.size();
  check_dim("output_grad.size", m, output_grad.size());
  const std::size_t n_layers = net.layers.size();

  NetworkGradients g;
  // d/d(head pre-activation); ReLU'(0) := 0.
  Vector da = output_grad.cwiseProduct((cache.head_preactivation.col(0).array() > 0.0).cast<double>().matrix());
  if (parameter_grads) {
    g.dense.weight = cache.head_input.transpose() * da;
    g.dense.bias = Matrix::Constant(1, 1, da.sum());
  }
  Matrix dh_last = da * net.dense.weight.transpose();  // m x H
  if (cache.dropout_mask.size() > 0) dh_last = dh_last.cwiseProduct(cache.dropout_mask);

  // Gradient flowing into each layer's hidden output at each step, from above.
  Sequence dh_from_above(kTimesteps);
  dh_from_above[kTimesteps - 1] = dh_last;

  g.layers.resize(n_layers);
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto& p = net.layers[li];
    const auto& steps = cache.steps[li];
    const long h = p.units();
    const bool need_param = parameter_grads;
    LstmParams grad;
    if (need_param) grad = LstmParams::zeros(p.inputs(), h);

    Sequence dx(kTimesteps);
    Matrix dh_next = Matrix::Zero(m, h);
    Matrix dc_next = Matrix::Zero(m, h);
    Matrix dz(m, 4 * h);
    const Matrix zeros = Matrix::Zero(m, h);
    for (int t = kTimesteps - 1; t >= 0; --t) {
      const auto& a = steps[t];
      Matrix dh = dh_next;
      if (dh_from_above[t].size() > 0) dh += dh_from_above[t];
      const Matrix& c_prev = t > 0 ? steps[t - 1].cell : zeros;
      const Matrix relu_c = a.cell.cwiseMax(0.0);

      const Matrix d_out = dh.cwiseProduct(relu_c);
      Matrix dc = dc_next + dh.cwiseProduct(a.output_gate).cwiseProduct(detail::relu_mask(a.cell));
      const Matrix d_in = dc.cwiseProduct(a.candidate);
      const Matrix d_forget = dc.cwiseProduct(c_prev);
      const Matrix d_cand = dc.cwiseProduct(a.input_gate);
      dc_next = dc.cwiseProduct(a.forget_gate);

      auto sig_grad = [](const Matrix& s) { return s.array() * (1.0 - s.array()); };
      dz.middleCols(0 * h, h) = (d_in.array() * sig_grad(a.input_gate)).matrix();
      dz.middleCols(1 * h, h) = (d_forget.array() * sig_grad(a.forget_gate)).matrix();
      dz.middleCols(2 * h, h) = d_cand.cwiseProduct(detail::relu_mask(a.candidate));
      dz.middleCols(3 * h, h) = (d_out.array() * sig_grad(a.output_gate)).matrix();

      const Matrix& x_t = li == 0 ? cache.inputs[t] : cache.steps[li - 1][t].hidden;
      if (need_param) {
        grad.kernel.noalias() += x_t.transpose() * dz;
        if (t > 0) grad.recurrent_kernel.noalias() += steps[t - 1].hidden.transpose() * dz;
        grad.bias += dz.colwise().sum();
      }
      dx[t] = dz * p.kernel.transpose();
      dh_next = dz * p.recurrent_kernel.transpose();
    }
    if (need_param) g.layers[li] = std::move(grad);
    if (li == 0) {
      g.inputs = std::move(dx);
    } else {
      dh_from_above = std::move(dx);
    }
  }
  return g;
}

/// d(prediction)/d(input) for each sequence, evaluated in inference mode.
inline Sequence prediction_input_gradient(const Sequence& batch, const LstmNetwork& net, Vector* predictions = nullptr) {
  ForwardCache cache = forward_cached(batch, net, false, nullptr);
  if (predictions != nullptr) *predictions = cache.predictions;
  return backward(cache, net, Vector::Ones(cache.predictions.size()), false).inputs;
}

/// Slices stays [rows] out of a time-major batch.
inline Sequence select_rows(const Sequence& batch, const std::vector<long>& rows) {
  Sequence out;
  out.reserve(batch.size());
  for (const auto& xt : batch) {
    Matrix sel(static_cast<long>(rows.size()), xt.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sel.row(static_cast<long>(i)) = xt.row(rows[i]);
    out.push_back(std::move(sel));
  }
  return out;
}

}  // namespace xferlos
