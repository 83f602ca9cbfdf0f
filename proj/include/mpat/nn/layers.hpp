#pragma once

#include <concepts>
#include <string>
#include <string_view>

#include "mpat/common.hpp"
#include "mpat/nn/tensor.hpp"

namespace mpat::nn {

enum class Activation { Identity, ReLU, Tanh, Sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

double activate(Activation a, double z);
/// Derivative of the activation with respect to its pre-activation input `z`.
double activation_derivative(Activation a, double z);

// Parameter sets. Gradients reuse the same structs with zeroed tensors.

struct Dense {
  Tensor weight;  // out x in
  Tensor bias;    // out
  Activation activation = Activation::Identity;

  std::size_t in() const { return weight.dim(1); }
  std::size_t out() const { return weight.dim(0); }
};

struct Conv1D {
  Tensor kernel;  // filters x width x in_channels
  Tensor bias;    // filters
  std::size_t dilation = 1;
  Activation activation = Activation::Identity;

  std::size_t filters() const { return kernel.dim(0); }
  std::size_t width() const { return kernel.dim(1); }
  std::size_t channels() const { return kernel.dim(2); }
  std::size_t receptive_field() const { return (width() - 1) * dilation + 1; }
};

/// Gate blocks are stacked in the order input, forget, candidate, output.
struct Lstm {
  Tensor input_weight;      // 4H x in
  Tensor recurrent_weight;  // 4H x H
  Tensor bias;              // 4H

  std::size_t hidden_size() const { return recurrent_weight.dim(1); }
  std::size_t input_size() const { return input_weight.dim(1); }
};

/// Glorot-uniform weights, zero biases.
Dense make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng);
Conv1D make_conv1d(std::size_t channels, std::size_t filters, std::size_t width, std::size_t dilation,
                   Activation act, Rng& rng);
Lstm make_lstm(std::size_t in, std::size_t hidden, Rng& rng);

Dense zeros_like(const Dense& p);
Conv1D zeros_like(const Conv1D& p);
Lstm zeros_like(const Lstm& p);

template <class D, class F>
  requires std::same_as<std::remove_const_t<D>, Dense>
void for_each_param(D& p, const std::string& prefix, F&& f) {
  f(prefix + "weight", p.weight);
  f(prefix + "bias", p.bias);
}

template <class C, class F>
  requires std::same_as<std::remove_const_t<C>, Conv1D>
void for_each_param(C& p, const std::string& prefix, F&& f) {
  f(prefix + "kernel", p.kernel);
  f(prefix + "bias", p.bias);
}

template <class L, class F>
  requires std::same_as<std::remove_const_t<L>, Lstm>
void for_each_param(L& p, const std::string& prefix, F&& f) {
  f(prefix + "input_weight", p.input_weight);
  f(prefix + "recurrent_weight", p.recurrent_weight);
  f(prefix + "bias", p.bias);
}

// Forward passes take an optional cache; the matching backward pass reads it,
// accumulates parameter gradients into `grad` and returns the input gradient.

struct DenseCache {
  Tensor input;
  Tensor preact;
};

Tensor dense_forward(const Tensor& x, const Dense& p, DenseCache* cache = nullptr);
Tensor dense_backward(const Dense& p, const DenseCache& cache, const Tensor& dy, Dense& grad);

struct Conv1DCache {
  Tensor input;
  Tensor preact;
};

/// Valid dilated convolution: out_len = len - (width - 1) * dilation.
Tensor conv1d_forward(const Tensor& x, const Conv1D& p, Conv1DCache* cache = nullptr);
Tensor conv1d_backward(const Conv1D& p, const Conv1DCache& cache, const Tensor& dy, Conv1D& grad);

struct PoolCache {
  std::size_t length = 0;
  std::vector<std::size_t> argmax;  // per filter; first maximal index wins ties
};

Tensor global_max_pool(const Tensor& x, PoolCache* cache = nullptr);
Tensor global_max_pool_backward(const PoolCache& cache, const Tensor& dy);

struct LstmCache {
  Tensor input;
  std::size_t steps = 0;
  std::vector<double> gates;   // steps x 4H, post-activation
  std::vector<double> cells;   // (steps + 1) x H, row 0 is the zero initial state
  std::vector<double> hiddens; // (steps + 1) x H
};

/// Runs the first `valid_length` rows of `x` (all rows when valid_length is
/// npos) from a zero state and returns the final hidden state.
Tensor lstm_forward(const Tensor& x, const Lstm& p, std::size_t valid_length = std::string::npos,
                    LstmCache* cache = nullptr);
Tensor lstm_backward(const Lstm& p, const LstmCache& cache, const Tensor& dh, Lstm& grad);

/// Max-shifted softmax over a rank-1 tensor.
Tensor softmax(const Tensor& x);
/// -log p[label], with p clamped below at 1e-12.
double cross_entropy_loss(const Tensor& probabilities, int label);
/// Gradient of cross_entropy_loss(softmax(z), label) with respect to z: p - onehot(label).
Tensor softmax_cross_entropy_grad(const Tensor& probabilities, int label);

Tensor concat(const Tensor& a, const Tensor& b);

}  // namespace mpat::nn
