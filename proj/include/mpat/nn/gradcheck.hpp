#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <vector>

#include "mpat/common.hpp"
#include "mpat/nn/layers.hpp"

namespace mpat::nn {

/// A loss with its input and label bound in, exposing its parameters and
/// analytic gradients (parallel to parameters()).
template <class Net>
concept Differentiable = requires(Net& n) {
  { n.parameters() } -> std::same_as<std::vector<Tensor*>>;
  { n.loss() } -> std::convertible_to<double>;
  { n.gradients() } -> std::same_as<std::vector<Tensor>>;
};

struct GradCheckOptions {
  double h = 1e-5;
  /// Entries checked per tensor; 0 checks every entry.
  std::size_t max_checks_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Central finite differences against the analytic gradients.
template <Differentiable Net>
GradCheckResult grad_check_detailed(Net& net, const GradCheckOptions& opt = {}) {
  const std::vector<Tensor> analytic = net.gradients();
  std::vector<Tensor*> params = net.parameters();
  Rng rng(opt.seed);
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    std::vector<std::size_t> idx(p.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opt.max_checks_per_tensor && idx.size() > opt.max_checks_per_tensor) {
      rng.shuffle(idx);
      idx.resize(opt.max_checks_per_tensor);
    }
    for (auto i : idx) {
      const double saved = p[i];
      p[i] = saved + opt.h;
      const double up = net.loss();
      p[i] = saved - opt.h;
      const double down = net.loss();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * opt.h);
      const double err = relative_error(analytic[k][i], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = k;
        result.worst_index = i;
      }
    }
  }
  return result;
}

template <Differentiable Net>
double grad_check(Net& net, double h = 1e-5) {
  return grad_check_detailed(net, {.h = h}).max_relative_error;
}

// Probe networks: one layer kind under test followed by a linear 2-way
// softmax head. The input tensor is itself a parameter, so the checked
// gradients cover the layer's input path as well as its weights.

struct DenseProbe {
  Tensor input;
  Dense layer;
  Dense head;
  int label = 0;

  static DenseProbe random(std::size_t in, std::size_t out, Activation act, Rng& rng);
  std::vector<Tensor*> parameters();
  double loss() const;
  std::vector<Tensor> gradients() const;
};

struct Conv1DProbe {
  Tensor input;  // len x channels
  Conv1D layer;
  Dense head;
  int label = 0;

  static Conv1DProbe random(std::size_t len, std::size_t channels, std::size_t filters, std::size_t width,
                            std::size_t dilation, Activation act, Rng& rng);
  std::vector<Tensor*> parameters();
  double loss() const;
  std::vector<Tensor> gradients() const;
};

struct MaxPoolProbe {
  Tensor input;  // len x filters
  Dense head;
  int label = 0;

  static MaxPoolProbe random(std::size_t len, std::size_t filters, Rng& rng);
  std::vector<Tensor*> parameters();
  double loss() const;
  std::vector<Tensor> gradients() const;
};

struct LstmProbe {
  Tensor input;  // len x in
  Lstm layer;
  Dense head;
  std::size_t valid_length = 0;
  int label = 0;

  static LstmProbe random(std::size_t len, std::size_t in, std::size_t hidden, Rng& rng);
  std::vector<Tensor*> parameters();
  double loss() const;
  std::vector<Tensor> gradients() const;
};

static_assert(Differentiable<DenseProbe>);
static_assert(Differentiable<Conv1DProbe>);
static_assert(Differentiable<MaxPoolProbe>);
static_assert(Differentiable<LstmProbe>);

}  // namespace mpat::nn
