#pragma once

// Neural layers built from the differentiable operators: window-smoothed
// (transposed) convolutions, linear maps, embedding tables and an LSTM stack.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sing/grad.hpp"
#include "sing/ops.hpp"

namespace sing::nn {

using grad::Parameter;
using grad::ParameterList;
using grad::Var;

/// Deterministic parameter initialisation. Values are drawn in 64-bit and
/// rounded to the layer precision, so float and double models built from
/// the same seed agree up to that rounding.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  Tensor<T> uniform(const Shape& shape, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(shape);
    for (auto& v : t.values()) v = static_cast<T>(dist(rng_));
    return t;
  }

  template <typename T>
  Tensor<T> normal(const Shape& shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor<T> t(shape);
    for (auto& v : t.values()) v = static_cast<T>(dist(rng_));
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

/// Multiplies every tap of a (.. x K) kernel by `window` along K. Applied at
/// forward time so the stored parameter stays unwindowed.
template <typename T>
Var<T> smooth_kernel_with_window(const Var<T>& kernel, std::span<const double> window) {
  return grad::mul_window(kernel, window);
}

/// W x + b, with x either a column (in x 1) or a sequence (in x T).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require(weight.value().rank() == 2 && x.value().rank() == 2 && weight.dim(1) == x.dim(0),
          "linear: weight " + shape_string(weight.shape()) + " does not accept input " +
              shape_string(x.shape()));
  return grad::add_bias(grad::matmul(weight, x), bias);
}

struct Conv1dSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  bool bias = true;
  std::vector<double> window;  // empty: no smoothing
  // Weights start uniform in +-init_gain / sqrt(fan_in), with fan_in counting
  // the taps summed per output and their mean squared window value. sqrt(6)
  // keeps activation scale through a ReLU, sqrt(3) through a linear layer.
  double init_gain = 1.0;
};

inline double mean_square(const std::vector<double>& window) {
  if (window.empty()) return 1.0;
  double acc = 0.0;
  for (double w : window) acc += w * w;
  return acc / static_cast<double>(window.size());
}

template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, Conv1dSpec spec, Initializer& init)
      : spec_(std::move(spec)) {
    const double fan_in = static_cast<double>(spec_.in_channels * spec_.kernel) * mean_square(spec_.window);
    const double bound = spec_.init_gain / std::sqrt(fan_in);
    weight_ = Parameter<T>(name + ".weight",
                           init.uniform<T>({spec_.out_channels, spec_.in_channels, spec_.kernel}, bound));
    if (spec_.bias) bias_ = Parameter<T>(name + ".bias", Tensor<T>({spec_.out_channels}));
  }

  Var<T> forward(const Var<T>& x) const {
    Var<T> kernel = weight_.var();
    if (!spec_.window.empty()) kernel = smooth_kernel_with_window(kernel, spec_.window);
    return grad::conv1d(x, kernel, spec_.bias ? bias_.var() : Var<T>(), spec_.stride);
  }

  void collect(ParameterList<T>& out) {
    out.push_back(&weight_);
    if (spec_.bias) out.push_back(&bias_);
  }
  const Conv1dSpec& spec() const { return spec_; }

 private:
  Conv1dSpec spec_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Transposed convolution with an output bias. Weight is C_in x C_out x K.
template <typename T>
class ConvTranspose1d {
 public:
  ConvTranspose1d() = default;
  ConvTranspose1d(const std::string& name, Conv1dSpec spec, Initializer& init)
      : spec_(std::move(spec)) {
    // Each output sample sums C_in * K / stride taps.
    const double fan_in = static_cast<double>(spec_.in_channels * spec_.kernel) /
                          static_cast<double>(spec_.stride) * mean_square(spec_.window);
    weight_ = Parameter<T>(name + ".weight",
                           init.uniform<T>({spec_.in_channels, spec_.out_channels, spec_.kernel},
                                           spec_.init_gain / std::sqrt(fan_in)));
    if (spec_.bias) bias_ = Parameter<T>(name + ".bias", Tensor<T>({spec_.out_channels}));
  }

  Var<T> forward(const Var<T>& x) const {
    Var<T> kernel = weight_.var();
    if (!spec_.window.empty()) kernel = smooth_kernel_with_window(kernel, spec_.window);
    Var<T> y = grad::conv_transpose1d(x, kernel, spec_.stride);
    return spec_.bias ? grad::add_bias(y, bias_.var()) : y;
  }

  void collect(ParameterList<T>& out) {
    out.push_back(&weight_);
    if (spec_.bias) out.push_back(&bias_);
  }
  const Conv1dSpec& spec() const { return spec_; }

 private:
  Conv1dSpec spec_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Initializer& init)
      : weight_(name + ".weight", init.uniform<T>({out, in}, 1.0 / std::sqrt(static_cast<double>(in)))),
        bias_(name + ".bias", Tensor<T>({out})) {}

  Var<T> forward(const Var<T>& x) const { return linear(x, weight_.var(), bias_.var()); }

  void collect(ParameterList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, std::size_t rows, std::size_t width, Initializer& init)
      : table_(name + ".table", init.normal<T>({rows, width}, 0.1)) {}

  Var<T> lookup(std::size_t index) const { return grad::embedding_lookup(table_.var(), index); }
  const Var<T>& table() const { return table_.var(); }
  std::size_t rows() const { return table_.value().dim(0); }
  std::size_t width() const { return table_.value().dim(1); }

  void collect(ParameterList<T>& out) { out.push_back(&table_); }

 private:
  Parameter<T> table_;
};

// ---------------------------------------------------------------------------
// LSTM. Packed gate order is (i, f, g, o) along the 4H rows.

template <typename T>
struct LstmWeights {
  Var<T> w_ih;  // 4H x In
  Var<T> w_hh;  // 4H x H
  Var<T> bias;  // 4H
};

template <typename T>
struct LstmState {
  Var<T> h;  // H x 1
  Var<T> c;  // H x 1
};

template <typename T>
LstmState<T> zero_state(std::size_t hidden) {
  return {Var<T>(Tensor<T>({hidden, 1})), Var<T>(Tensor<T>({hidden, 1}))};
}

/// Cell update from the full 4H pre-activation.
template <typename T>
LstmState<T> lstm_cell(const Var<T>& preact, const Var<T>& c_prev) {
  const std::size_t h = preact.dim(0) / 4;
  Var<T> i = grad::sigmoid(grad::slice(preact, 0, 0, h));
  Var<T> f = grad::sigmoid(grad::slice(preact, 0, h, 2 * h));
  Var<T> g = grad::tanh(grad::slice(preact, 0, 2 * h, 3 * h));
  Var<T> o = grad::sigmoid(grad::slice(preact, 0, 3 * h, 4 * h));
  Var<T> c = grad::add(grad::mul(f, c_prev), grad::mul(i, g));
  return {grad::mul(o, grad::tanh(c)), c};
}

template <typename T>
LstmState<T> lstm_step(const Var<T>& x, const LstmState<T>& prev, const LstmWeights<T>& w) {
  require(w.w_ih.dim(1) == x.dim(0), "lstm_step: input width does not match weights");
  require(w.w_hh.dim(0) == 4 * prev.h.dim(0), "lstm_step: hidden size does not match weights");
  Var<T> pre = grad::add(linear(x, w.w_ih, w.bias), grad::matmul(w.w_hh, prev.h));
  return lstm_cell(pre, prev.c);
}

template <typename T>
struct LstmStackResult {
  Var<T> outputs;                     // H x N, top layer
  std::vector<LstmState<T>> states;   // final state per layer
};

/// Runs each layer over the whole sequence before the next one. `initial`
/// holds one state per layer; empty means all-zero states.
template <typename T>
LstmStackResult<T> lstm_stack_forward(const Var<T>& inputs, std::span<const LstmWeights<T>> layers,
                                      std::vector<LstmState<T>> initial = {}) {
  require(!layers.empty(), "lstm stack needs at least one layer");
  const std::size_t steps = inputs.dim(1);
  if (initial.empty()) {
    for (const auto& w : layers) initial.push_back(zero_state<T>(w.w_hh.dim(1)));
  }
  require(initial.size() == layers.size(), "lstm stack: one initial state per layer required");

  LstmStackResult<T> result;
  Var<T> sequence = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LstmWeights<T>& w = layers[l];
    Var<T> projected = linear(sequence, w.w_ih, w.bias);
    LstmState<T> state = initial[l];
    std::vector<Var<T>> hidden;
    hidden.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      Var<T> pre = grad::add(grad::slice(projected, 1, t, t + 1), grad::matmul(w.w_hh, state.h));
      state = lstm_cell(pre, state.c);
      hidden.push_back(state.h);
    }
    sequence = grad::concat(hidden, 1);
    result.states.push_back(state);
  }
  result.outputs = sequence;
  return result;
}

template <typename T>
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(const std::string& name, std::size_t input, std::size_t hidden, std::size_t layers,
            Initializer& init)
      : hidden_(hidden) {
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = l == 0 ? input : hidden;
      const double bound = 1.0 / std::sqrt(static_cast<double>(in + hidden));
      const std::string prefix = name + ".layer" + std::to_string(l);
      Layer layer;
      layer.w_ih = Parameter<T>(prefix + ".w_ih", init.uniform<T>({4 * hidden, in}, bound));
      layer.w_hh = Parameter<T>(prefix + ".w_hh", init.uniform<T>({4 * hidden, hidden}, bound));
      Tensor<T> bias({4 * hidden});
      for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = T(1);  // forget gate
      layer.bias = Parameter<T>(prefix + ".bias", std::move(bias));
      layers_.push_back(std::move(layer));
    }
  }

  std::vector<LstmWeights<T>> weights() const {
    std::vector<LstmWeights<T>> out;
    for (const auto& l : layers_) out.push_back({l.w_ih.var(), l.w_hh.var(), l.bias.var()});
    return out;
  }

  LstmStackResult<T> forward(const Var<T>& inputs, std::vector<LstmState<T>> initial = {}) const {
    const auto w = weights();
    return lstm_stack_forward<T>(inputs, w, std::move(initial));
  }

  std::size_t hidden() const { return hidden_; }
  std::size_t layers() const { return layers_.size(); }

  void collect(ParameterList<T>& out) {
    for (auto& l : layers_) {
      out.push_back(&l.w_ih);
      out.push_back(&l.w_hh);
      out.push_back(&l.bias);
    }
  }

 private:
  struct Layer {
    Parameter<T> w_ih;
    Parameter<T> w_hh;
    Parameter<T> bias;
  };
  std::size_t hidden_ = 0;
  std::vector<Layer> layers_;
};

}  // namespace sing::nn
