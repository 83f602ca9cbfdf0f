#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mpat/nn/tensor.hpp"

namespace mpat::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  /// Zeroed moments shaped like `params`.
  static AdamState for_params(std::span<Tensor* const> params, AdamConfig config = {});
  static AdamState for_params(std::span<const Tensor* const> params, AdamConfig config = {});
};

/// One bias-corrected Adam update of every parameter in place; increments the step.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state);

}  // namespace mpat::nn
